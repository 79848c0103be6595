#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace mgcn {

inline constexpr double kDefaultThreshold = 0.5;

/// Binary confusion counts; COVID-19 is the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class Metric : unsigned { accuracy = 0, precision, recall, f1, misclassification_rate };

std::string_view to_string(Metric metric);

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double misclassification_rate = 0.0;
    /// Bit i set when metric i had a zero denominator and was reported as 0.
    unsigned degenerate = 0;

    bool is_degenerate(Metric m) const { return (degenerate >> static_cast<unsigned>(m)) & 1u; }
    double value(Metric m) const;
};

/// Tallies predictions (score >= threshold means positive) against 0/1 labels.
ConfusionMatrix confusion(std::span<const float> scores, std::span<const float> labels,
                          double threshold = kDefaultThreshold);

/// accuracy = (tp+tn)/n, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// f1 = 2PR/(P+R), misclassification = (fp+fn)/n.
MetricsReport report(const ConfusionMatrix& cm);

}  // namespace mgcn
