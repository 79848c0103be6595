#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "mgcn/tensor.hpp"

namespace mgcn {

/// Ordered record of executed differentiable ops for one training step.
///
/// Each entry keeps its inputs, its output and a closure that reads the
/// output gradient and accumulates into the inputs that require grad.
/// backward() replays entries in reverse, visiting each exactly once.
class GradTape {
public:
    using BackwardFn = std::function<void(const Tensor& output)>;

    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;
    GradTape(GradTape&&) = default;
    GradTape& operator=(GradTape&&) = default;

    /// Records an op when any input requires grad and marks the output
    /// accordingly. No-op on a null tape.
    static void record(GradTape* tape, std::initializer_list<Tensor> inputs, const Tensor& output,
                       BackwardFn fn);
    static void record(GradTape* tape, const std::vector<Tensor>& inputs, const Tensor& output,
                       BackwardFn fn);

    void backward(const Tensor& loss);
    void reset();

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn fn;
    };
    std::vector<Node> nodes_;
};

/// Populates grad on every trainable tensor reachable from `loss`.
inline void backward(const Tensor& loss, GradTape& tape) { tape.backward(loss); }

}  // namespace mgcn
