#include "mgcn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mgcn/errors.hpp"
#include "mgcn/random.hpp"

namespace mgcn {

namespace layer {

LayerSpec conv2d(std::size_t filters, Extent2 kernel, Activation activation, Padding padding, Extent2 stride) {
    return {"", Conv2DSpec{filters, kernel, stride, padding, activation}};
}

LayerSpec max_pool(Extent2 window, Extent2 stride, Padding padding) {
    return {"", MaxPoolSpec{window, stride, padding}};
}

LayerSpec avg_pool(Extent2 window, Extent2 stride, Padding padding) {
    return {"", AvgPoolSpec{window, stride, padding}};
}

LayerSpec dense(std::size_t units, Activation activation) { return {"", DenseSpec{units, activation}}; }

LayerSpec flatten() { return {"", FlattenSpec{}}; }

LayerSpec dropout(float rate) { return {"", DropoutSpec{rate}}; }

LayerSpec batch_norm() { return {"", BatchNormSpec{}}; }

LayerSpec global_avg_pool() { return {"", GlobalAvgPoolSpec{}}; }

LayerSpec activation(Activation fn) { return {"", ActivationSpec{fn}}; }

LayerSpec branch(std::vector<std::vector<LayerSpec>> chains) { return {"", BranchSpec{std::move(chains)}}; }

}  // namespace layer

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_spatial(const LayerSpec& spec, const Shape& input) {
    if (input.size() != 3) {
        throw ShapeError("layer " + spec.name + " (" + std::string(kind_name(spec)) +
                         ") expects a (C,H,W) input, got " + shape_to_string(input));
    }
}

void check_extent(const Extent2& e, const char* what) {
    if (e.h == 0 || e.w == 0) throw ConfigError(std::string(what) + " must be positive");
}

// Uniform in [-limit, limit) from the top 24 bits of the generator.
float uniform_symmetric(std::mt19937_64& rng, float limit) {
    const float u = static_cast<float>(rng() >> 40) * 0x1p-24f;
    return (2.0f * u - 1.0f) * limit;
}

Tensor init_weights(Shape shape, std::size_t fan_in, std::size_t fan_out, Activation activation,
                    std::mt19937_64& rng) {
    const double limit = activation == Activation::relu
                             ? std::sqrt(6.0 / static_cast<double>(fan_in))
                             : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(std::move(shape));
    for (float& v : w.mutable_data()) v = uniform_symmetric(rng, static_cast<float>(limit));
    w.set_trainable(true);
    return w;
}

Shape pooled_shape(const LayerSpec& spec, const Shape& input, Extent2 window, Extent2 stride, Padding padding) {
    require_spatial(spec, input);
    try {
        return {input[0], axis_geometry(input[1], window.h, stride.h, padding).out,
                axis_geometry(input[2], window.w, stride.w, padding).out};
    } catch (const ShapeError& e) {
        throw ShapeError("layer " + spec.name + ": " + e.what() + " (input " + shape_to_string(input) + ")");
    }
}

Tensor trainable_filled(Shape shape, float value) {
    Tensor t(std::move(shape), value);
    t.set_trainable(true);
    return t;
}

const Tensor& find_named(const std::vector<NamedTensor>& list, std::string_view name) {
    for (const auto& nt : list) {
        if (nt.name == name) return nt.value;
    }
    throw ConfigError("no tensor named '" + std::string(name) + "'");
}

}  // namespace

const Tensor& LayerState::param(std::string_view name) const { return find_named(params, name); }

const Tensor& LayerState::buffer(std::string_view name) const { return find_named(buffers, name); }

std::string_view kind_name(const LayerSpec& spec) {
    return std::visit(overloaded{
                          [](const Conv2DSpec&) { return std::string_view("conv2d"); },
                          [](const MaxPoolSpec&) { return std::string_view("max_pool"); },
                          [](const AvgPoolSpec&) { return std::string_view("avg_pool"); },
                          [](const DenseSpec&) { return std::string_view("dense"); },
                          [](const FlattenSpec&) { return std::string_view("flatten"); },
                          [](const DropoutSpec&) { return std::string_view("dropout"); },
                          [](const BatchNormSpec&) { return std::string_view("batch_norm"); },
                          [](const GlobalAvgPoolSpec&) { return std::string_view("global_avg_pool"); },
                          [](const ActivationSpec&) { return std::string_view("activation"); },
                          [](const BranchSpec&) { return std::string_view("branch"); },
                      },
                      spec.kind);
}

void validate(const LayerSpec& spec) {
    std::visit(overloaded{
                   [](const Conv2DSpec& s) {
                       if (s.filters == 0) throw ConfigError("Conv2D filters must be positive");
                       check_extent(s.kernel, "Conv2D kernel");
                       check_extent(s.stride, "Conv2D stride");
                   },
                   [](const MaxPoolSpec& s) {
                       check_extent(s.window, "pool window");
                       check_extent(s.stride, "pool stride");
                   },
                   [](const AvgPoolSpec& s) {
                       check_extent(s.window, "pool window");
                       check_extent(s.stride, "pool stride");
                   },
                   [](const DenseSpec& s) {
                       if (s.units == 0) throw ConfigError("Dense units must be positive");
                   },
                   [](const DropoutSpec& s) {
                       if (!(s.rate >= 0.0f && s.rate < 1.0f)) {
                           throw ConfigError("Dropout rate must lie in [0,1), got " + std::to_string(s.rate));
                       }
                   },
                   [](const BranchSpec& s) {
                       if (s.chains.size() < 2) throw ConfigError("Branch needs at least 2 chains");
                       for (const auto& chain : s.chains) {
                           for (const auto& inner : chain) validate(inner);
                       }
                   },
                   [](const auto&) {},
               },
               spec.kind);
}

void assign_names(std::vector<LayerSpec>& layers, const std::string& prefix) {
    std::map<std::string, std::size_t, std::less<>> counters;
    for (auto& spec : layers) {
        const std::string kind(kind_name(spec));
        const std::size_t n = ++counters[kind];
        if (spec.name.empty()) spec.name = prefix + kind + "_" + std::to_string(n);
        if (auto* br = std::get_if<BranchSpec>(&spec.kind)) {
            for (std::size_t c = 0; c < br->chains.size(); ++c) {
                assign_names(br->chains[c], spec.name + "/path" + std::to_string(c + 1) + "/");
            }
        }
    }
}

Shape output_shape(const LayerSpec& spec, const Shape& input) {
    validate(spec);
    return std::visit(
        overloaded{
            [&](const Conv2DSpec& s) -> Shape {
                require_spatial(spec, input);
                try {
                    return {s.filters, axis_geometry(input[1], s.kernel.h, s.stride.h, s.padding).out,
                            axis_geometry(input[2], s.kernel.w, s.stride.w, s.padding).out};
                } catch (const ShapeError& e) {
                    throw ShapeError("layer " + spec.name + ": " + e.what() + " (input " + shape_to_string(input) + ")");
                }
            },
            [&](const MaxPoolSpec& s) -> Shape { return pooled_shape(spec, input, s.window, s.stride, s.padding); },
            [&](const AvgPoolSpec& s) -> Shape { return pooled_shape(spec, input, s.window, s.stride, s.padding); },
            [&](const DenseSpec& s) -> Shape {
                if (input.size() != 1) {
                    throw ShapeError("layer " + spec.name + " (dense) expects a flat input, got " +
                                     shape_to_string(input));
                }
                return {s.units};
            },
            [&](const FlattenSpec&) -> Shape { return {shape_size(input)}; },
            [&](const GlobalAvgPoolSpec&) -> Shape {
                require_spatial(spec, input);
                return {input[0]};
            },
            [&](const BranchSpec& s) -> Shape {
                require_spatial(spec, input);
                Shape merged;
                for (const auto& chain : s.chains) {
                    Shape shape = input;
                    for (const auto& inner : chain) shape = output_shape(inner, shape);
                    if (shape.size() != 3) {
                        throw ShapeError("branch " + spec.name + ": chain output " + shape_to_string(shape) +
                                         " is not spatial");
                    }
                    if (merged.empty()) {
                        merged = shape;
                    } else if (shape[1] != merged[1] || shape[2] != merged[2]) {
                        throw ShapeError("branch " + spec.name + ": chain outputs disagree spatially, " +
                                         shape_to_string(shape) + " vs " + shape_to_string(merged));
                    } else {
                        merged[0] += shape[0];
                    }
                }
                return merged;
            },
            [&](const auto&) -> Shape { return input; },
        },
        spec.kind);
}

LayerState init_params(const LayerSpec& spec, const Shape& input_shape, std::uint64_t seed) {
    output_shape(spec, input_shape);
    LayerState state;
    state.rng.seed(mix_seed(seed, 0));
    std::mt19937_64 rng(mix_seed(seed, 1));
    std::visit(overloaded{
                   [&](const Conv2DSpec& s) {
                       const std::size_t c = input_shape[0];
                       const std::size_t area = s.kernel.h * s.kernel.w;
                       state.params.push_back({"kernel", init_weights({s.filters, c, s.kernel.h, s.kernel.w},
                                                                      c * area, s.filters * area, s.activation, rng)});
                       state.params.push_back({"bias", trainable_filled({s.filters}, 0.0f)});
                   },
                   [&](const DenseSpec& s) {
                       const std::size_t in = input_shape[0];
                       state.params.push_back(
                           {"kernel", init_weights({in, s.units}, in, s.units, s.activation, rng)});
                       state.params.push_back({"bias", trainable_filled({s.units}, 0.0f)});
                   },
                   [&](const BatchNormSpec&) {
                       const std::size_t c = input_shape[0];
                       state.params.push_back({"gamma", trainable_filled({c}, 1.0f)});
                       state.params.push_back({"beta", trainable_filled({c}, 0.0f)});
                       state.buffers.push_back({"moving_mean", Tensor(Shape{c}, 0.0f)});
                       state.buffers.push_back({"moving_variance", Tensor(Shape{c}, 1.0f)});
                   },
                   [&](const BranchSpec& s) {
                       for (std::size_t c = 0; c < s.chains.size(); ++c) {
                           std::vector<LayerState> chain_states;
                           Shape shape = input_shape;
                           for (std::size_t i = 0; i < s.chains[c].size(); ++i) {
                               const LayerSpec& inner = s.chains[c][i];
                               chain_states.push_back(init_params(inner, shape, mix_seed(mix_seed(seed, 2 + c), i)));
                               shape = output_shape(inner, shape);
                           }
                           state.chains.push_back(std::move(chain_states));
                       }
                   },
                   [](const auto&) {},
               },
               spec.kind);
    return state;
}

Tensor forward(const LayerSpec& spec, LayerState& state, const Tensor& input, GradTape* tape) {
    const bool training = state.mode == Mode::train;
    return std::visit(
        overloaded{
            [&](const Conv2DSpec& s) {
                Tensor y = ops::conv2d(input, state.param("kernel"), state.param("bias"), s.stride, s.padding, tape);
                return ops::activate(y, s.activation, tape);
            },
            [&](const MaxPoolSpec& s) { return ops::pool2d(input, PoolMode::max, s.window, s.stride, s.padding, tape); },
            [&](const AvgPoolSpec& s) { return ops::pool2d(input, PoolMode::avg, s.window, s.stride, s.padding, tape); },
            [&](const DenseSpec& s) {
                if (input.rank() != 2) {
                    throw ShapeError("layer " + spec.name + " (dense) expects (N,F) input, got " +
                                     shape_to_string(input.shape()));
                }
                Tensor y = ops::matmul(input, state.param("kernel"), tape);
                y = ops::add_bias(y, state.param("bias"), tape);
                return ops::activate(y, s.activation, tape);
            },
            [&](const FlattenSpec&) { return ops::flatten(input, tape); },
            [&](const DropoutSpec& s) {
                if (!training || s.rate == 0.0f) return input;
                Tensor mask(input.shape());
                const float keep_scale = 1.0f / (1.0f - s.rate);
                for (float& m : mask.mutable_data()) {
                    const double u = static_cast<double>(state.rng() >> 11) * 0x1p-53;
                    m = u < s.rate ? 0.0f : keep_scale;
                }
                return ops::mul(input, mask, tape);
            },
            [&](const BatchNormSpec&) {
                if (!training) {
                    return ops::batch_norm_inference(input, state.param("gamma"), state.param("beta"),
                                                     state.buffer("moving_mean"), state.buffer("moving_variance"),
                                                     kBatchNormEpsilon, tape);
                }
                ops::BatchMoments moments;
                Tensor y = ops::batch_norm_train(input, state.param("gamma"), state.param("beta"),
                                                 kBatchNormEpsilon, tape, &moments);
                Tensor mean = state.buffer("moving_mean");
                Tensor var = state.buffer("moving_variance");
                auto mv = mean.mutable_data();
                auto vv = var.mutable_data();
                for (std::size_t c = 0; c < mv.size(); ++c) {
                    mv[c] = kBatchNormMomentum * mv[c] + (1.0f - kBatchNormMomentum) * moments.mean[c];
                    vv[c] = kBatchNormMomentum * vv[c] + (1.0f - kBatchNormMomentum) * moments.variance[c];
                }
                return y;
            },
            [&](const GlobalAvgPoolSpec&) { return ops::global_avg_pool(input, tape); },
            [&](const ActivationSpec& s) { return ops::activate(input, s.fn, tape); },
            [&](const BranchSpec& s) {
                std::vector<Tensor> outputs;
                outputs.reserve(s.chains.size());
                for (std::size_t c = 0; c < s.chains.size(); ++c) {
                    Tensor x = input;
                    for (std::size_t i = 0; i < s.chains[c].size(); ++i) {
                        x = forward(s.chains[c][i], state.chains[c][i], x, tape);
                    }
                    outputs.push_back(x);
                }
                return ops::concat(outputs, 1, tape);
            },
        },
        spec.kind);
}

void set_mode(LayerState& state, Mode mode) {
    state.mode = mode;
    for (auto& chain : state.chains) {
        for (auto& inner : chain) set_mode(inner, mode);
    }
}

void visit_tensors(const LayerSpec& spec, const LayerState& state,
                   const std::function<void(const std::string&, const Tensor&, bool)>& fn) {
    for (const auto& p : state.params) fn(spec.name + "." + p.name, p.value, false);
    for (const auto& b : state.buffers) fn(spec.name + "." + b.name, b.value, true);
    if (const auto* br = std::get_if<BranchSpec>(&spec.kind)) {
        for (std::size_t c = 0; c < br->chains.size() && c < state.chains.size(); ++c) {
            for (std::size_t i = 0; i < br->chains[c].size(); ++i) {
                visit_tensors(br->chains[c][i], state.chains[c][i], fn);
            }
        }
    }
}

void set_trainable(LayerState& state, bool trainable) {
    for (auto& p : state.params) p.value.set_trainable(trainable);
    for (auto& chain : state.chains) {
        for (auto& inner : chain) set_trainable(inner, trainable);
    }
}

}  // namespace mgcn
