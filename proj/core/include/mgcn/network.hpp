#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/layers.hpp"

namespace mgcn {

struct ShapeTraceEntry {
    std::string layer;
    Shape shape;  ///< per-sample output shape
};

/// Ordered layer graph plus parameters.
///
/// `input_shape` is (H, W, C) as images arrive from the data pipeline; the
/// network itself consumes (N, C, H, W) batches. Layers [0, frozen_prefix)
/// are non-trainable and always run in eval mode.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<LayerState> states;
    Shape input_shape;
    std::size_t frozen_prefix = 0;

    /// (C, H, W) view of input_shape.
    Shape sample_shape() const;
    bool initialized() const { return !layers.empty() && states.size() == layers.size(); }

    /// Allocates parameters for every layer that has none yet (all of them
    /// for a freshly built network); deterministic in `seed`.
    void init(std::uint64_t seed);

    Tensor forward(const Tensor& batch, GradTape* tape = nullptr);

    /// Frozen layers stay in eval mode whatever `mode` is.
    void set_mode(Mode mode);

    /// Marks the first `count` layers non-trainable.
    void freeze(std::size_t count);

    std::vector<Tensor> trainable_parameters() const;

    /// Every parameter and buffer with its dotted name, in layer order.
    std::vector<NamedTensor> named_tensors(bool include_buffers = true) const;

    /// Scalar count over parameters (buffers excluded).
    std::size_t parameter_count(bool trainable_only = false) const;
};

/// Per-layer output shapes from input_shape; throws ShapeError naming the
/// first layer that does not fit.
std::vector<ShapeTraceEntry> shape_trace(const Network& net);

}  // namespace mgcn
