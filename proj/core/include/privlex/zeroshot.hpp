#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "privlex/score.hpp"

namespace privlex::zeroshot {

/// Multi-label ground truth: the set of concepts present in each image.
struct ConceptAnnotations {
    std::map<std::string, std::set<std::string>> present;

    [[nodiscard]] bool has_image(const std::string& image_id) const { return present.contains(image_id); }
};

/// JSON Lines {"image_id": "...", "concepts": [...]}. When `vocabulary` is given, unknown concept
/// ids are rejected.
ConceptAnnotations load_annotations(const std::filesystem::path& path,
                                    const std::vector<std::string>* vocabulary = nullptr);

struct ThresholdEntry {
    std::string concept_id;
    double threshold = 0.0;
    double train_ba = 0.0;

    bool operator==(const ThresholdEntry&) const = default;
};

struct SkippedConcept {
    std::string concept_id;
    std::string reason;

    bool operator==(const SkippedConcept&) const = default;
};

struct ThresholdTable {
    std::vector<ThresholdEntry> entries;
    std::vector<SkippedConcept> skipped;
    std::string description_style_tag;

    [[nodiscard]] const ThresholdEntry* find(const std::string& concept_id) const;
    bool operator==(const ThresholdTable&) const = default;
};

struct CalibrationResult {
    double threshold = 0.0;
    double ba = 0.5;
};

/// Best-BA threshold for one concept. Candidates are midpoints between consecutive distinct
/// scores; among optimal candidates the median one is taken and the threshold is placed at the
/// centre of the contiguous optimal interval containing it. All-equal scores, or concepts where
/// every split is worse than detecting nothing, give BA 0.5 at the maximum score.
CalibrationResult calibrate_concept(std::span<const double> scores, std::span<const std::uint8_t> present);

/// Only images listed in `annotations` take part. Concepts without both positive and
/// negative training images are skipped and reported.
ThresholdTable calibrate_thresholds(const ScoreMatrix& train_scores, const ConceptAnnotations& annotations,
                                    std::string description_style_tag = {});

/// Concepts whose score is strictly above their threshold. Concepts without a threshold
/// are ignored and returned through `missing` when given.
std::set<std::string> detect(std::span<const float> scores_row, const std::vector<std::string>& concept_ids,
                             const ThresholdTable& table, std::vector<std::string>* missing = nullptr);

struct ConceptDetectionMetrics {
    std::string concept_id;
    double ba = 0;
    double precision = 0;
    double recall = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct DetectionEvaluation {
    std::vector<ConceptDetectionMetrics> per_concept;  // vocabulary order, calibrated concepts only
    std::vector<std::string> excluded;                 // calibrated but lacking a class in the test set
    double mean_ba = 0;
    double median_ba = 0;
    std::string description_style_tag;
};

DetectionEvaluation evaluate_detection(const ScoreMatrix& test_scores, const ConceptAnnotations& annotations,
                                       const ThresholdTable& table);

struct StyleDelta {
    std::string concept_id;
    double ba_a = 0;
    double ba_b = 0;
    double delta = 0;  // ba_a - ba_b
};

struct StyleComparison {
    std::string style_a;
    std::string style_b;
    std::vector<StyleDelta> deltas;  // concepts aggregated in both evaluations
    double median_delta = 0;
    double median_abs_delta = 0;
};

StyleComparison compare_styles(const DetectionEvaluation& a, const DetectionEvaluation& b);

double median(std::vector<double> values);

void save_thresholds(const ThresholdTable& table, const std::filesystem::path& path);
ThresholdTable load_thresholds(const std::filesystem::path& path);
void save_evaluation(const DetectionEvaluation& eval, const std::filesystem::path& path);
DetectionEvaluation load_evaluation(const std::filesystem::path& path);
void save_comparison(const StyleComparison& cmp, const std::filesystem::path& path);

}  // namespace privlex::zeroshot
