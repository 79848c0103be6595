#include "mgcn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "mgcn/errors.hpp"

namespace mgcn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

struct Tensor::Impl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool trainable = false;
    bool requires_grad = false;
};

namespace {

void check_shape(const Shape& shape) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    impl_->data.assign(shape_size(shape), fill);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    if (values.size() != shape_size(shape)) {
        throw ShapeError("tensor of shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{1}, value); }

const Shape& Tensor::shape() const {
    static const Shape empty;
    return impl_ ? impl_->shape : empty;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape()));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::size() const { return impl_ ? impl_->data.size() : 0; }

std::span<const float> Tensor::data() const {
    if (!impl_) return {};
    return impl_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!impl_) return {};
    return impl_->data;
}

float Tensor::item() const {
    if (size() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_to_string(shape()));
    return impl_->data[0];
}

bool Tensor::trainable() const { return impl_ && impl_->trainable; }

void Tensor::set_trainable(bool trainable) {
    impl_->trainable = trainable;
    impl_->requires_grad = trainable;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    if (!impl_) return {};
    return impl_->grad;
}

std::span<float> Tensor::mutable_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

void Tensor::clear_grad() {
    if (impl_) {
        impl_->grad.clear();
        impl_->grad.shrink_to_fit();
    }
}

Tensor Tensor::clone() const {
    if (!impl_) return {};
    return Tensor(impl_->shape, impl_->data);
}

}  // namespace mgcn
