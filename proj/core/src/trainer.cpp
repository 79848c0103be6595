#include "mgcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgcn/errors.hpp"
#include "mgcn/random.hpp"

namespace mgcn {

namespace {

void check_pairs(std::size_t scores, std::size_t labels) {
    if (scores != labels) {
        throw ShapeError("bce_loss: " + std::to_string(scores) + " scores vs " + std::to_string(labels) + " labels");
    }
    if (scores == 0) throw ShapeError("bce_loss: empty batch");
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

double bce_term(double p, double y) {
    const double q = clamp_probability(p);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

}  // namespace

double bce_value(std::span<const float> scores, std::span<const float> labels) {
    check_pairs(scores.size(), labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) total += bce_term(scores[i], labels[i]);
    return total / static_cast<double>(scores.size());
}

Tensor bce_loss(const Tensor& scores, const Tensor& labels, GradTape* tape) {
    if (scores.rank() != 1 || labels.rank() != 1) {
        throw ShapeError("bce_loss expects rank-1 scores and labels, got " + shape_to_string(scores.shape()) +
                         " and " + shape_to_string(labels.shape()));
    }
    Tensor out = Tensor::scalar(static_cast<float>(bce_value(scores.data(), labels.data())));
    GradTape::record(tape, {scores}, out, [scores, labels](const Tensor& o) {
        Tensor s = scores;
        const double g = o.grad()[0];
        const auto p = scores.data();
        const auto y = labels.data();
        auto gs = s.mutable_grad();
        const double n = static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double pi = p[i];
            if (pi < kProbabilityClamp || pi > 1.0 - kProbabilityClamp) continue;
            const double d = -y[i] / pi + (1.0 - y[i]) / (1.0 - pi);
            gs[i] += static_cast<float>(g * d / n);
        }
    });
    return out;
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0,1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
}

Optimizer::Optimizer(const TrainConfig& cfg) : cfg_(cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

void Optimizer::step(std::span<const Tensor> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].trainable() && !params[i].has_grad()) {
            throw AutogradError("optimizer step: trainable parameter " + std::to_string(i) + " has no gradient");
        }
    }
    ++steps_;
    if (cfg_.optimizer == OptimizerKind::adam && m_.size() != params.size()) {
        if (!m_.empty()) throw ConfigError("optimizer step: parameter list changed between steps");
        m_.resize(params.size());
        v_.resize(params.size());
    }
    const double lr = cfg_.learning_rate;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        if (!p.trainable()) continue;
        auto w = p.mutable_data();
        const auto g = p.grad();
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<float>(w[j] - lr * g[j]);
        } else {
            auto& m = m_[i];
            auto& v = v_[i];
            if (m.empty()) {
                m.assign(w.size(), 0.0f);
                v.assign(w.size(), 0.0f);
            }
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double gj = g[j];
                const double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
                const double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
                m[j] = static_cast<float>(mj);
                v[j] = static_cast<float>(vj);
                w[j] = static_cast<float>(w[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + cfg_.epsilon));
            }
        }
        p.clear_grad();
    }
}

void check_dataset(const Network& net, const Dataset& ds) {
    if (ds.empty()) throw DataError("dataset is empty");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.records[i].pixels.shape() != net.input_shape) {
            throw ShapeError("record " + std::to_string(i) + " has shape " +
                             shape_to_string(ds.records[i].pixels.shape()) + " but the network expects " +
                             shape_to_string(net.input_shape));
        }
    }
}

Evaluation evaluate(Network& net, const Dataset& ds, double threshold, std::size_t batch_size) {
    check_dataset(net, ds);
    net.set_mode(Mode::eval);
    Evaluation ev;
    ev.scores.reserve(ds.size());
    std::vector<float> labels;
    labels.reserve(ds.size());
    for (const auto& idx : batch_indices(ds.size(), batch_size, std::nullopt)) {
        const Batch b = make_batch(ds, idx);
        const Tensor out = net.forward(b.images);
        ev.scores.insert(ev.scores.end(), out.data().begin(), out.data().end());
        labels.insert(labels.end(), b.labels.data().begin(), b.labels.data().end());
    }
    ev.confusion = confusion(ev.scores, labels, threshold);
    ev.metrics = report(ev.confusion);
    ev.bce = bce_value(ev.scores, labels);
    return ev;
}

History train(Network& net, const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
    cfg.validate();
    if (!net.initialized()) net.init(cfg.seed);
    check_dataset(net, train_ds);
    check_dataset(net, val_ds);

    const std::vector<Tensor> params = net.trainable_parameters();
    Optimizer opt(cfg);
    History history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        net.set_mode(Mode::train);
        const auto plan = batch_indices(train_ds.size(), cfg.batch_size, mix_seed(cfg.seed, epoch));
        for (std::size_t b = 0; b < plan.size(); ++b) {
            const Batch batch = make_batch(train_ds, plan[b]);
            GradTape tape;
            const Tensor out = net.forward(batch.images, &tape);
            const Tensor scores = ops::reshape(out, {plan[b].size()}, &tape);
            const Tensor loss = bce_loss(scores, batch.labels, &tape);
            if (!std::isfinite(loss.item())) throw DivergenceError(epoch + 1, b + 1);
            tape.backward(loss);
            opt.step(params);
        }
        EpochRecord record;
        const Evaluation tr = evaluate(net, train_ds, cfg.threshold, cfg.batch_size);
        const Evaluation va = evaluate(net, val_ds, cfg.threshold, cfg.batch_size);
        if (!std::isfinite(tr.bce) || !std::isfinite(va.bce)) throw DivergenceError(epoch + 1, plan.size());
        record.train = {tr.metrics, tr.bce};
        record.validation = {va.metrics, va.bce};
        history.epochs.push_back(record);
        if (on_epoch) on_epoch(epoch + 1, record);
    }
    return history;
}

}  // namespace mgcn
