#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mgcn/data.hpp"
#include "mgcn/metrics.hpp"
#include "mgcn/network.hpp"

namespace mgcn {

/// Scores are clamped to [kProbabilityClamp, 1 - kProbabilityClamp] before
/// the logarithm, so a single term never exceeds -ln(1e-7) ~ 16.118.
inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy of scores[N] against 0/1 labels[N].
Tensor bce_loss(const Tensor& scores, const Tensor& labels, GradTape* tape = nullptr);

/// Same quantity without a tape, accumulated in double.
double bce_value(std::span<const float> scores, std::span<const float> labels);

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    double threshold = kDefaultThreshold;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// SGD or Adam over a fixed, ordered parameter list.
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg);

    /// Updates every trainable tensor from its gradient, then clears the
    /// gradients. Non-trainable tensors are skipped. The list must keep the
    /// same order between calls (Adam moments are positional).
    void step(std::span<const Tensor> params);

    std::size_t steps() const { return steps_; }

private:
    TrainConfig cfg_;
    std::size_t steps_ = 0;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
};

struct PhaseResult {
    MetricsReport metrics;
    double bce = 0.0;
};

struct EpochRecord {
    PhaseResult train;
    PhaseResult validation;
};

struct History {
    std::vector<EpochRecord> epochs;
};

struct Evaluation {
    ConfusionMatrix confusion;
    MetricsReport metrics;
    double bce = 0.0;
    std::vector<float> scores;  ///< dataset order
};

/// Eval-mode scoring of every record once, in dataset order.
Evaluation evaluate(Network& net, const Dataset& ds, double threshold = kDefaultThreshold,
                    std::size_t batch_size = 32);

/// Called after each epoch with its 1-based number.
using EpochCallback = std::function<void(std::size_t epoch, const EpochRecord& record)>;

/// Mini-batch training. Epoch e (0-based) shuffles with mix_seed(cfg.seed, e);
/// after every epoch both splits are scored in eval mode. An uninitialized
/// network is initialized from cfg.seed first. Throws DivergenceError on a
/// non-finite batch loss.
History train(Network& net, const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// Throws ShapeError unless the records are (H,W,C) images matching net.input_shape.
void check_dataset(const Network& net, const Dataset& ds);

}  // namespace mgcn
