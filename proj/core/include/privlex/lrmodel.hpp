#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "privlex/datasets.hpp"
#include "privlex/score.hpp"

namespace privlex {

/// Data term and L1 penalty of the sparse logistic regression:
///
///   F(W, b) = (1/N) sum_i BCE(sigmoid(W.x_i + b), y_i) + lambda * |W|_1,   lambda = 1 / (C N)
///
/// The bias is not penalised. Inputs are copied to double once.
class LogisticProblem {
public:
    LogisticProblem(std::span<const float> features, std::size_t rows, std::size_t cols,
                    std::span<const std::uint8_t> labels, double C);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }

    [[nodiscard]] double smooth_loss(std::span<const double> w, double b) const;
    /// Fills grad_w and returns {loss, d loss / d b}.
    std::pair<double, double> smooth_gradient(std::span<const double> w, double b, std::span<double> grad_w) const;
    [[nodiscard]] double penalty(std::span<const double> w) const;
    [[nodiscard]] double objective(std::span<const double> w, double b) const { return smooth_loss(w, b) + penalty(w); }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::size_t rows_;
    std::size_t cols_;
    double lambda_;
};

struct ProximalFit {
    std::vector<double> weights;
    double bias = 0.0;
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;  // F after every accepted step, starting with F(0, 0)
};

/// Proximal gradient (ISTA) with backtracking on the step size, started from W = 0, b = 0.
/// Soft-thresholding applies to W only; zeroed weights are exactly 0. Stops after
/// `max_iter` steps or at an exact fixed point.
ProximalFit fit_proximal_gradient(const LogisticProblem& problem, int max_iter);

enum class WeightSign { Private, Public, Zero };

WeightSign sign_of(double weight) noexcept;
std::string_view to_string(WeightSign sign) noexcept;
/// "+", "-" or "0".
std::string_view sign_marker(WeightSign sign) noexcept;

struct Hyperparameters {
    double C = 1.0;
    int max_iter = 100;
    std::uint64_t seed = 0;

    bool operator==(const Hyperparameters&) const = default;
};

struct TrainingMeta {
    std::string dataset_tag;
    double objective_value = 0.0;
    std::size_t nonzero_count = 0;
    int iterations = 0;

    bool operator==(const TrainingMeta&) const = default;
};

struct SparseLinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<std::string> concept_ids;
    Normalizer normalizer;
    Hyperparameters hyper;
    TrainingMeta meta;
    std::string vocab_hash;

    bool operator==(const SparseLinearModel&) const = default;
};

inline constexpr int kModelFormatVersion = 1;

/// `scores` must be normalized with `normalizer` and its rows must match `data` id for id.
SparseLinearModel train(const ScoreMatrix& scores, const LabeledDataset& data, const Normalizer& normalizer,
                        const Hyperparameters& hyper, const std::string& dataset_tag = {});

/// sigmoid(W.x + b) per row.
std::vector<double> predict_proba(const SparseLinearModel& model, const ScoreMatrix& scores);
double predict_row(const SparseLinearModel& model, std::span<const float> normalized_row);
std::vector<std::uint8_t> predict_labels(const std::vector<double>& probabilities);

std::map<std::string, WeightSign> weight_signs(const SparseLinearModel& model);

/// Recomputes F(W, b) of the model on the given training data.
double recompute_objective(const SparseLinearModel& model, const ScoreMatrix& scores, const LabeledDataset& data);

void save_model(const SparseLinearModel& model, const std::filesystem::path& path);
/// When `expected_vocab_hash` is non-empty, a model trained on a different vocabulary is refused.
SparseLinearModel load_model(const std::filesystem::path& path, const std::string& expected_vocab_hash = {});

}  // namespace privlex
