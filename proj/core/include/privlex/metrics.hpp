#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace privlex::metrics {

/// Binary confusion counts; the positive class is "private" (label 1).
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

/// Metrics with a zero denominator are reported as 0 and their names are listed in `undefined`.
/// Balanced accuracy averages the recall of the classes present in the ground truth, so it
/// equals (r_priv + r_pub) / 2 whenever both classes occur.
struct Report {
    double acc = 0;
    double ba = 0;
    double p_priv = 0;
    double r_priv = 0;
    double f1_priv = 0;
    double p_pub = 0;
    double r_pub = 0;
    double f1_pub = 0;
    double f1_macro = 0;
    std::vector<std::string> undefined;

    bool operator==(const Report&) const = default;
};

Report report(const ConfusionCounts& counts);

/// Convenience: report(confusion(pred, truth)).
Report evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

}  // namespace privlex::metrics
