#include "mgcn/network.hpp"

#include "mgcn/errors.hpp"
#include "mgcn/random.hpp"

namespace mgcn {

Shape Network::sample_shape() const {
    if (input_shape.size() != 3) {
        throw ShapeError("network input_shape must be (H,W,C), got " + shape_to_string(input_shape));
    }
    return {input_shape[2], input_shape[0], input_shape[1]};
}

void Network::init(std::uint64_t seed) {
    if (frozen_prefix > layers.size()) throw ConfigError("frozen_prefix exceeds layer count");
    if (states.size() > layers.size()) states.clear();
    states.reserve(layers.size());
    Shape shape = sample_shape();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i >= states.size()) states.push_back(init_params(layers[i], shape, mix_seed(seed, i)));
        shape = output_shape(layers[i], shape);
    }
    freeze(frozen_prefix);
}

Tensor Network::forward(const Tensor& batch, GradTape* tape) {
    if (!initialized()) throw ConfigError("network parameters are not initialized");
    const Shape expected = sample_shape();
    if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expected) {
        throw ShapeError("network expects batches of " + shape_to_string(expected) + " samples, got " +
                         shape_to_string(batch.shape()));
    }
    Tensor x = batch;
    for (std::size_t i = 0; i < layers.size(); ++i) x = mgcn::forward(layers[i], states[i], x, tape);
    return x;
}

void Network::set_mode(Mode mode) {
    for (std::size_t i = 0; i < states.size(); ++i) mgcn::set_mode(states[i], i < frozen_prefix ? Mode::eval : mode);
}

void Network::freeze(std::size_t count) {
    if (count > layers.size()) throw ConfigError("cannot freeze more layers than the network has");
    frozen_prefix = count;
    for (std::size_t i = 0; i < states.size(); ++i) {
        set_trainable(states[i], i >= count);
        if (i < count) mgcn::set_mode(states[i], Mode::eval);
    }
}

std::vector<Tensor> Network::trainable_parameters() const {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        visit_tensors(layers[i], states[i], [&](const std::string&, const Tensor& t, bool is_buffer) {
            if (!is_buffer && t.trainable()) out.push_back(t);
        });
    }
    return out;
}

std::vector<NamedTensor> Network::named_tensors(bool include_buffers) const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        visit_tensors(layers[i], states[i], [&](const std::string& name, const Tensor& t, bool is_buffer) {
            if (include_buffers || !is_buffer) out.push_back({name, t});
        });
    }
    return out;
}

std::size_t Network::parameter_count(bool trainable_only) const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        visit_tensors(layers[i], states[i], [&](const std::string&, const Tensor& t, bool is_buffer) {
            if (!is_buffer && (!trainable_only || t.trainable())) total += t.size();
        });
    }
    return total;
}

std::vector<ShapeTraceEntry> shape_trace(const Network& net) {
    std::vector<ShapeTraceEntry> trace;
    Shape shape = net.sample_shape();
    for (const auto& layer : net.layers) {
        shape = output_shape(layer, shape);
        trace.push_back({layer.name, shape});
    }
    return trace;
}

}  // namespace mgcn
