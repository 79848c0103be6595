#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mgcn/autograd.hpp"
#include "mgcn/ops.hpp"
#include "mgcn/tensor.hpp"

namespace mgcn {

inline constexpr float kBatchNormEpsilon = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.9f;

struct Conv2DSpec {
    std::size_t filters = 1;
    Extent2 kernel{3, 3};
    Extent2 stride{1, 1};
    Padding padding = Padding::same;
    Activation activation = Activation::none;
};

struct MaxPoolSpec {
    Extent2 window{2, 2};
    Extent2 stride{2, 2};
    Padding padding = Padding::valid;
};

struct AvgPoolSpec {
    Extent2 window{2, 2};
    Extent2 stride{2, 2};
    Padding padding = Padding::valid;
};

struct DenseSpec {
    std::size_t units = 1;
    Activation activation = Activation::none;
};

struct FlattenSpec {};

struct DropoutSpec {
    float rate = 0.0f;
};

struct BatchNormSpec {};

struct GlobalAvgPoolSpec {};

struct ActivationSpec {
    Activation fn = Activation::relu;
};

struct LayerSpec;

/// Parallel chains fed the same input, merged by channel concatenation.
/// An empty chain is the identity.
struct BranchSpec {
    std::vector<std::vector<LayerSpec>> chains;
};

struct LayerSpec {
    using Kind = std::variant<Conv2DSpec, MaxPoolSpec, AvgPoolSpec, DenseSpec, FlattenSpec, DropoutSpec,
                              BatchNormSpec, GlobalAvgPoolSpec, ActivationSpec, BranchSpec>;

    std::string name;
    Kind kind;
};

namespace layer {

LayerSpec conv2d(std::size_t filters, Extent2 kernel, Activation activation = Activation::relu,
                 Padding padding = Padding::same, Extent2 stride = {1, 1});
LayerSpec max_pool(Extent2 window, Extent2 stride, Padding padding = Padding::valid);
LayerSpec avg_pool(Extent2 window, Extent2 stride, Padding padding = Padding::valid);
LayerSpec dense(std::size_t units, Activation activation = Activation::none);
LayerSpec flatten();
LayerSpec dropout(float rate);
LayerSpec batch_norm();
LayerSpec global_avg_pool();
LayerSpec activation(Activation fn);
LayerSpec branch(std::vector<std::vector<LayerSpec>> chains);

}  // namespace layer

/// Short kind tag ("conv2d", "max_pool", ...) used in names and descriptors.
std::string_view kind_name(const LayerSpec& spec);

/// Throws ConfigError when the spec's own fields are out of range.
void validate(const LayerSpec& spec);

/// Assigns `<kind>_<n>` names to unnamed layers, recursing into branches as
/// `<branch>/path<i>/<kind>_<n>`.
void assign_names(std::vector<LayerSpec>& layers, const std::string& prefix = "");

/// Per-sample output shape: (C,H,W) for spatial tensors, (F) for vectors.
Shape output_shape(const LayerSpec& spec, const Shape& input);

enum class Mode { train, eval };

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct LayerState {
    std::vector<NamedTensor> params;
    /// Non-trainable statistics (batch-norm running mean/variance).
    std::vector<NamedTensor> buffers;
    /// One state list per branch chain.
    std::vector<std::vector<LayerState>> chains;
    Mode mode = Mode::eval;
    std::mt19937_64 rng;

    const Tensor& param(std::string_view name) const;
    const Tensor& buffer(std::string_view name) const;
};

/// Parameters for `spec` given the per-sample input shape.
///
/// ReLU-activated layers get He-uniform fan-in weights, everything else
/// Glorot-uniform; biases zero; batch-norm scale 1, shift 0, mean 0, var 1.
LayerState init_params(const LayerSpec& spec, const Shape& input_shape, std::uint64_t seed);

/// Applies the layer to a batched input (leading batch axis).
Tensor forward(const LayerSpec& spec, LayerState& state, const Tensor& input, GradTape* tape = nullptr);

void set_mode(LayerState& state, Mode mode);

/// Visits every tensor of a layer (params, then buffers, then branch chains)
/// with its dotted name `<layer>.<param>`.
void visit_tensors(const LayerSpec& spec, const LayerState& state,
                   const std::function<void(const std::string&, const Tensor&, bool is_buffer)>& fn);

void set_trainable(LayerState& state, bool trainable);

}  // namespace mgcn
