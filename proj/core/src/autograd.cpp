#include "mgcn/autograd.hpp"

#include <algorithm>

#include "mgcn/errors.hpp"

namespace mgcn {

void GradTape::record(GradTape* tape, std::initializer_list<Tensor> inputs, const Tensor& output,
                      BackwardFn fn) {
    record(tape, std::vector<Tensor>(inputs), output, std::move(fn));
}

void GradTape::record(GradTape* tape, const std::vector<Tensor>& inputs, const Tensor& output,
                      BackwardFn fn) {
    if (tape == nullptr) return;
    const bool needed =
        std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!needed) return;
    Tensor out = output;
    out.set_requires_grad(true);
    tape->nodes_.push_back(Node{inputs, out, std::move(fn)});
}

void GradTape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw AutogradError("backward needs a scalar loss, got shape " + shape_to_string(loss.shape()));
    }
    auto it = std::find_if(nodes_.rbegin(), nodes_.rend(),
                           [&](const Node& n) { return n.output.same_as(loss); });
    if (it == nodes_.rend()) throw AutogradError("loss tensor was not produced on this tape");

    Tensor seed = loss;
    seed.mutable_grad()[0] += 1.0f;
    for (; it != nodes_.rend(); ++it) {
        if (!it->output.has_grad()) continue;
        it->fn(it->output);
        // Intermediate gradients are dead once consumed.
        if (!it->output.trainable()) it->output.clear_grad();
    }
}

void GradTape::reset() { nodes_.clear(); }

}  // namespace mgcn
