#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privlex/datasets.hpp"
#include "privlex/lrmodel.hpp"

namespace privlex {

inline constexpr double kDefaultTau = 0.245;
inline constexpr std::size_t kMinSurfaced = 3;

struct ExplanationItem {
    std::string concept_id;
    float raw_score = 0.0F;
    WeightSign sign = WeightSign::Zero;

    bool operator==(const ExplanationItem&) const = default;
};

struct Explanation {
    std::string image_id;
    double private_probability = 0.0;
    std::vector<ExplanationItem> items;  // raw score descending, ties by vocabulary order
    double tau = kDefaultTau;
    std::size_t k = 0;

    bool operator==(const Explanation&) const = default;
};

enum class ThresholdTarget { Raw, Normalized };

/// k = min(max(#{j : s_j > tau}, 3), n).
std::size_t surfaced_count(std::span<const float> scores, double tau);

/// Indices of the k highest scores; ties broken by lower index.
std::vector<std::size_t> top_k_indices(std::span<const float> scores, std::size_t k);

/// Surfaces the top-k concepts of one image with their weight signs. `tau` is compared
/// against the raw cosine row unless `target` says otherwise; ranking always uses the
/// thresholded row.
Explanation explain_image(const SparseLinearModel& model, std::string image_id, std::span<const float> raw_row,
                          std::span<const float> norm_row, double tau = kDefaultTau,
                          ThresholdTarget target = ThresholdTarget::Raw);

/// Explains every row; `raw` and `normalized` must share image and concept order.
std::vector<Explanation> explain_all(const SparseLinearModel& model, const ScoreMatrix& raw, const ScoreMatrix& normalized,
                                     double tau = kDefaultTau, ThresholdTarget target = ThresholdTarget::Raw);

enum class ReportFormat { Text, Json, Html };

ReportFormat parse_report_format(std::string_view name);

/// Per image: predicted probability, optional ground truth, and the surfaced concepts with
/// sign markers (+ private, - public, 0 zero weight).
std::string render_report(const std::vector<Explanation>& explanations, const LabeledDataset* labels,
                          ReportFormat format);

}  // namespace privlex
