#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "privlex/matrix.hpp"

namespace privlex {

/// Image x concept score table. Raw values are cosine similarities in [-1, 1];
/// normalized values lie in [0, 1].
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(std::vector<std::string> image_ids, std::vector<std::string> concept_ids, std::vector<float> values,
                bool normalized, std::string vocab_hash = {});

    [[nodiscard]] std::size_t rows() const noexcept { return image_ids_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return concept_ids_.size(); }
    [[nodiscard]] const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
    [[nodiscard]] const std::vector<std::string>& concept_ids() const noexcept { return concept_ids_; }
    [[nodiscard]] const std::vector<float>& values() const noexcept { return values_; }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }
    /// Content hash of the vocabulary the concept columns came from; empty when unknown.
    [[nodiscard]] const std::string& vocab_hash() const noexcept { return vocab_hash_; }
    [[nodiscard]] std::span<const float> row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }
    [[nodiscard]] float at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }

    /// Rows in the given order; every id must be present.
    [[nodiscard]] ScoreMatrix select_rows(const std::vector<std::string>& ids) const;

    bool operator==(const ScoreMatrix&) const = default;

private:
    std::vector<std::string> image_ids_;
    std::vector<std::string> concept_ids_;
    std::vector<float> values_;
    bool normalized_ = false;
    std::string vocab_hash_;
};

/// Raw scores: values[i][j] = <I_i, T_j> / (|I_i| |T_j|), accumulated in double.
/// `threads` > 1 splits image rows across workers; results do not depend on it.
ScoreMatrix cosine_scores(const EmbeddingMatrix& images, const EmbeddingMatrix& concepts,
                          std::string vocab_hash = {}, unsigned threads = 1);

enum class NormalizerMode { PerConcept, Global };

/// Min-max bounds fitted on training scores. In Global mode every concept shares
/// the whole-matrix bounds.
struct Normalizer {
    std::vector<std::string> concept_ids;
    std::vector<float> min;
    std::vector<float> max;
    NormalizerMode mode = NormalizerMode::PerConcept;

    bool operator==(const Normalizer&) const = default;
};

Normalizer fit_normalizer(const ScoreMatrix& train_scores, NormalizerMode mode = NormalizerMode::PerConcept);

/// (v - min) / (max - min) clamped to [0, 1]; constant columns map to 0.5.
ScoreMatrix apply_normalizer(const Normalizer& norm, const ScoreMatrix& scores);
float normalize_value(float v, float lo, float hi);

void save_normalizer(const Normalizer& norm, const std::filesystem::path& path);
Normalizer load_normalizer(const std::filesystem::path& path);

/// PVX1 payload + `<file>.ids.json` (image ids) + `<file>.concepts.json`
/// ({"concept_ids": [...], "normalized": bool, "vocab_hash": "..."}).
void save_scores(const ScoreMatrix& scores, const std::filesystem::path& path);
ScoreMatrix load_scores(const std::filesystem::path& path);
std::filesystem::path concepts_sidecar(const std::filesystem::path& path);

}  // namespace privlex
