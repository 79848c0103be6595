#pragma once

// Slow, obviously-correct oracles the optimized kernels are checked against.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mgcn/metrics.hpp"
#include "mgcn/ops.hpp"
#include "mgcn/tensor.hpp"

namespace ref {

struct Array {
    mgcn::Shape shape;
    std::vector<double> values;
};

/// Output length and leading pad computed from first principles, not axis_geometry().
void axis(std::size_t in, std::size_t window, std::size_t stride, mgcn::Padding padding, std::size_t& out,
          std::size_t& pad_before);

Array conv2d(const mgcn::Tensor& input, const mgcn::Tensor& kernels, const mgcn::Tensor& bias, mgcn::Extent2 stride,
             mgcn::Padding padding);

Array pool2d(const mgcn::Tensor& input, mgcn::PoolMode mode, mgcn::Extent2 window, mgcn::Extent2 stride,
             mgcn::Padding padding);

Array matmul(const mgcn::Tensor& a, const mgcn::Tensor& b);

/// One branch per sample: walks the four outcome cases with explicit comparisons.
mgcn::ConfusionMatrix count(const std::vector<float>& scores, const std::vector<float>& labels, double threshold);

/// Central difference of f at every element of x; x is restored afterwards.
std::vector<double> central_difference(const std::function<double()>& f, mgcn::Tensor x, float step);

/// Seeded generator helpers for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool coin() { return pick(0, 1) == 1; }
    mgcn::Tensor tensor(mgcn::Shape shape, float lo = -1.0f, float hi = 1.0f);
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace ref
