#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mgcn/autograd.hpp"
#include "mgcn/tensor.hpp"

namespace mgcn {

enum class Padding { same, valid };
enum class PoolMode { max, avg };
enum class Activation { none, relu, sigmoid };

/// Height/width pair used for kernels, windows and strides.
struct Extent2 {
    std::size_t h = 1;
    std::size_t w = 1;

    friend bool operator==(const Extent2&, const Extent2&) = default;
};

/// Output length and leading pad along one spatial axis.
///
/// `same`: out = ceil(in / stride), total pad = max((out-1)*stride + window - in, 0),
/// with the odd element of padding on the trailing side.
/// `valid`: out = floor((in - window) / stride) + 1, no padding.
struct AxisGeometry {
    std::size_t out = 0;
    std::size_t pad_before = 0;
};

AxisGeometry axis_geometry(std::size_t in, std::size_t window, std::size_t stride, Padding padding);

std::string_view to_string(Padding padding);
std::string_view to_string(PoolMode mode);
std::string_view to_string(Activation fn);

namespace ops {

/// Cross-correlation of input[N,C,H,W] with kernels[O,C,kh,kw] plus bias[O].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, Extent2 stride,
              Padding padding, GradTape* tape = nullptr);

/// Max or mean over windows of input[N,C,H,W]. Padded cells never contribute.
Tensor pool2d(const Tensor& input, PoolMode mode, Extent2 window, Extent2 stride, Padding padding,
              GradTape* tape = nullptr);

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);

/// x[N,F] + bias[F] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias, GradTape* tape = nullptr);

Tensor activate(const Tensor& input, Activation fn, GradTape* tape = nullptr);

Tensor concat(std::span<const Tensor> inputs, std::size_t axis, GradTape* tape = nullptr);

Tensor reshape(const Tensor& input, Shape shape, GradTape* tape = nullptr);

/// (N, ...) -> (N, product of the rest)
Tensor flatten(const Tensor& input, GradTape* tape = nullptr);

/// (N,C,H,W) -> (N,C), mean over the spatial positions.
Tensor global_avg_pool(const Tensor& input, GradTape* tape = nullptr);

/// Per-channel mean and biased variance of the batch that was normalized.
struct BatchMoments {
    std::vector<float> mean;
    std::vector<float> variance;
};

/// Normalizes with batch statistics over every axis but the channel axis (1).
/// Accepts (N,C,H,W) or (N,C).
Tensor batch_norm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta, float epsilon,
                        GradTape* tape = nullptr, BatchMoments* moments = nullptr);

/// Normalizes with fixed statistics; the statistics receive no gradient.
Tensor batch_norm_inference(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                            const Tensor& mean, const Tensor& variance, float epsilon,
                            GradTape* tape = nullptr);

/// Elementwise product of equal-shaped tensors.
Tensor mul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);

/// Sum of all elements as a one-element tensor.
Tensor sum(const Tensor& input, GradTape* tape = nullptr);

}  // namespace ops

/// Scalar logistic function with outputs clamped into the open interval (0, 1)
/// of float32: [smallest positive normal, 1 - 2^-24].
float sigmoid(float x);

}  // namespace mgcn
