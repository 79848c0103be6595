#include "mgcn/metrics.hpp"

#include <string>

#include "mgcn/errors.hpp"

namespace mgcn {

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::accuracy: return "accuracy";
        case Metric::precision: return "precision";
        case Metric::recall: return "recall";
        case Metric::f1: return "f1";
        case Metric::misclassification_rate: return "misclassification_rate";
    }
    return "unknown";
}

double MetricsReport::value(Metric m) const {
    switch (m) {
        case Metric::accuracy: return accuracy;
        case Metric::precision: return precision;
        case Metric::recall: return recall;
        case Metric::f1: return f1;
        case Metric::misclassification_rate: return misclassification_rate;
    }
    return 0.0;
}

ConfusionMatrix confusion(std::span<const float> scores, std::span<const float> labels, double threshold) {
    if (scores.size() != labels.size()) {
        throw ShapeError("confusion: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) throw ConfigError("confusion: no scored instances");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("confusion: threshold must lie in (0,1)");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0.0f && labels[i] != 1.0f) {
            throw ConfigError("confusion: label " + std::to_string(labels[i]) + " is not 0 or 1");
        }
        const bool predicted = static_cast<double>(scores[i]) >= threshold;
        const bool actual = labels[i] == 1.0f;
        if (predicted && actual) ++cm.tp;
        else if (predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport report(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw ConfigError("report: empty confusion matrix");
    MetricsReport r;
    const auto ratio = [&r](std::uint64_t num, std::uint64_t den, Metric m) {
        if (den == 0) {
            r.degenerate |= 1u << static_cast<unsigned>(m);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = ratio(cm.tp + cm.tn, n, Metric::accuracy);
    r.precision = ratio(cm.tp, cm.tp + cm.fp, Metric::precision);
    r.recall = ratio(cm.tp, cm.tp + cm.fn, Metric::recall);
    r.misclassification_rate = ratio(cm.fp + cm.fn, n, Metric::misclassification_rate);
    if (r.precision + r.recall == 0.0) {
        r.degenerate |= 1u << static_cast<unsigned>(Metric::f1);
        r.f1 = 0.0;
    } else {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

}  // namespace mgcn
