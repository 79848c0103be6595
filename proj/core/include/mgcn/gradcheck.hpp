#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mgcn {

/// Ops covered by run_gradient_checks, in report order.
std::span<const std::string_view> gradcheck_ops();

struct GradCheckOptions {
    std::uint64_t seed = 0;
    std::size_t trials = 100;
    double step = 1e-3;
    double tolerance = 1e-3;
    /// Restrict to these ops; empty means all.
    std::vector<std::string> only;
    /// Negates the analytic gradient of this op (detector self-test).
    std::string inject_sign_flip;
};

struct OpCheck {
    std::string op;
    std::size_t trials = 0;
    std::size_t elements = 0;  ///< gradient entries compared
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<OpCheck> ops;

    bool passed() const;
};

/// Central differences against the tape's analytic gradients.
///
/// Each trial draws small random tensors (at most 64 elements each), reduces
/// the op output to L = sum(out * R) for a fixed random R, and compares
/// dL/dx entry by entry with (L(x+h) - L(x-h)) / 2h. The relative error is
/// |a - n| / max(1, |a|, |n|).
GradCheckReport run_gradient_checks(const GradCheckOptions& opts = {});

}  // namespace mgcn
