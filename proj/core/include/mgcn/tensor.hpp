#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 array.
///
/// A Tensor is a handle: copies share storage, gradient buffer and flags.
/// Use clone() for an independent copy. Ops never write into their inputs.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    static Tensor scalar(float value);

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;
    bool defined() const { return impl_ != nullptr; }

    std::span<const float> data() const;
    std::span<float> mutable_data();
    float operator[](std::size_t i) const { return data()[i]; }
    /// Value of a single-element tensor.
    float item() const;

    /// Leaf parameter that the optimizer updates.
    bool trainable() const;
    void set_trainable(bool trainable);

    /// True for trainable leaves and for op outputs downstream of one.
    bool requires_grad() const;
    void set_requires_grad(bool value);

    bool has_grad() const;
    std::span<const float> grad() const;
    /// Gradient buffer, allocated as zeros on first access.
    std::span<float> mutable_grad();
    void clear_grad();

    Tensor clone() const;
    bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

}  // namespace mgcn
