#include "privlex/lrmodel.hpp"

#include <algorithm>
#include <cmath>

#include "jsonio.hpp"
#include "privlex/error.hpp"

namespace privlex {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

LogisticProblem::LogisticProblem(std::span<const float> features, std::size_t rows, std::size_t cols,
                                 std::span<const std::uint8_t> labels, double C)
    : x_(features.begin(), features.end()), y_(labels.size()), rows_(rows), cols_(cols) {
    if (features.size() != rows * cols) throw ValidationError("logistic problem: feature matrix shape mismatch");
    if (labels.size() != rows) throw ValidationError("logistic problem: label count does not match row count");
    if (rows == 0) throw ValidationError("logistic problem: no training rows");
    if (!(C > 0.0 && C <= 1.0)) throw ValidationError("C must lie in (0, 1], got " + std::to_string(C));
    for (std::size_t i = 0; i < rows; ++i) {
        if (labels[i] > 1) throw ValidationError("labels must be 0 or 1");
        y_[i] = labels[i];
    }
    lambda_ = 1.0 / (C * static_cast<double>(rows));
}

double LogisticProblem::smooth_loss(std::span<const double> w, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* xi = x_.data() + i * cols_;
        double z = b;
        for (std::size_t j = 0; j < cols_; ++j) z += w[j] * xi[j];
        total += softplus(z) - y_[i] * z;
    }
    return total / static_cast<double>(rows_);
}

std::pair<double, double> LogisticProblem::smooth_gradient(std::span<const double> w, double b,
                                                           std::span<double> grad_w) const {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double loss = 0.0, grad_b = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* xi = x_.data() + i * cols_;
        double z = b;
        for (std::size_t j = 0; j < cols_; ++j) z += w[j] * xi[j];
        loss += softplus(z) - y_[i] * z;
        const double r = sigmoid(z) - y_[i];
        grad_b += r;
        for (std::size_t j = 0; j < cols_; ++j) grad_w[j] += r * xi[j];
    }
    const double inv = 1.0 / static_cast<double>(rows_);
    for (auto& g : grad_w) g *= inv;
    return {loss * inv, grad_b * inv};
}

double LogisticProblem::penalty(std::span<const double> w) const {
    double s = 0.0;
    for (double v : w) s += std::abs(v);
    return lambda_ * s;
}

ProximalFit fit_proximal_gradient(const LogisticProblem& problem, int max_iter) {
    if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
    const std::size_t n = problem.cols();
    const double lambda = problem.lambda();

    ProximalFit fit;
    fit.weights.assign(n, 0.0);
    std::vector<double> grad(n), z(n);
    double lipschitz = 1.0;
    double objective = problem.objective(fit.weights, fit.bias);
    fit.objective_trace.push_back(objective);

    for (int it = 0; it < max_iter; ++it) {
        const auto [f, grad_b] = problem.smooth_gradient(fit.weights, fit.bias, grad);
        if (!std::isfinite(f)) throw RuntimeError("non-finite training loss at iteration " + std::to_string(it));

        double zb = 0.0, fz = 0.0;
        for (;;) {
            const double step = 1.0 / lipschitz;
            for (std::size_t j = 0; j < n; ++j) z[j] = soft_threshold(fit.weights[j] - step * grad[j], step * lambda);
            zb = fit.bias - step * grad_b;
            fz = problem.smooth_loss(z, zb);
            if (!std::isfinite(fz)) throw RuntimeError("non-finite training loss at iteration " + std::to_string(it));
            double lin = grad_b * (zb - fit.bias), quad = (zb - fit.bias) * (zb - fit.bias);
            for (std::size_t j = 0; j < n; ++j) {
                const double d = z[j] - fit.weights[j];
                lin += grad[j] * d;
                quad += d * d;
            }
            if (fz <= f + lin + 0.5 * lipschitz * quad || quad == 0.0) break;
            lipschitz *= 2.0;
            if (!std::isfinite(lipschitz)) throw RuntimeError("step-size search diverged at iteration " + std::to_string(it));
        }

        fit.iterations = it + 1;
        const bool fixed_point = zb == fit.bias && std::equal(z.begin(), z.end(), fit.weights.begin());
        fit.weights.swap(z);
        fit.bias = zb;
        objective = fz + problem.penalty(fit.weights);
        fit.objective_trace.push_back(objective);
        if (fixed_point) break;
    }
    fit.objective = objective;
    return fit;
}

WeightSign sign_of(double weight) noexcept {
    if (weight > 0) return WeightSign::Private;
    if (weight < 0) return WeightSign::Public;
    return WeightSign::Zero;
}

std::string_view to_string(WeightSign sign) noexcept {
    switch (sign) {
        case WeightSign::Private: return "private";
        case WeightSign::Public: return "public";
        case WeightSign::Zero: return "zero";
    }
    return "zero";
}

std::string_view sign_marker(WeightSign sign) noexcept {
    switch (sign) {
        case WeightSign::Private: return "+";
        case WeightSign::Public: return "-";
        case WeightSign::Zero: return "0";
    }
    return "0";
}

SparseLinearModel train(const ScoreMatrix& scores, const LabeledDataset& data, const Normalizer& normalizer,
                        const Hyperparameters& hyper, const std::string& dataset_tag) {
    if (!scores.normalized()) throw ValidationError("train: scores must be normalized to [0,1]");
    if (scores.image_ids() != data.image_ids)
        throw ValidationError("train: score rows and labels are not aligned (run align first)");
    if (scores.concept_ids() != normalizer.concept_ids)
        throw ValidationError("train: normalizer concept order differs from the score columns");
    if (hyper.max_iter < 1) throw ValidationError("train: max_iter must be >= 1");

    const LogisticProblem problem(scores.values(), scores.rows(), scores.cols(), data.labels, hyper.C);
    auto fit = fit_proximal_gradient(problem, hyper.max_iter);

    SparseLinearModel model;
    model.weights = std::move(fit.weights);
    model.bias = fit.bias;
    model.concept_ids = scores.concept_ids();
    model.normalizer = normalizer;
    model.hyper = hyper;
    model.vocab_hash = scores.vocab_hash();
    model.meta.dataset_tag = dataset_tag;
    model.meta.objective_value = fit.objective;
    model.meta.iterations = fit.iterations;
    model.meta.nonzero_count = static_cast<std::size_t>(
        std::count_if(model.weights.begin(), model.weights.end(), [](double w) { return w != 0.0; }));
    return model;
}

double predict_row(const SparseLinearModel& model, std::span<const float> row) {
    if (row.size() != model.weights.size()) throw ValidationError("predict: row length does not match the model");
    double z = model.bias;
    for (std::size_t j = 0; j < row.size(); ++j) z += model.weights[j] * row[j];
    return sigmoid(z);
}

std::vector<double> predict_proba(const SparseLinearModel& model, const ScoreMatrix& scores) {
    if (!scores.normalized()) throw ValidationError("predict: scores must be normalized");
    if (scores.concept_ids() != model.concept_ids)
        throw ValidationError("predict: score concept order does not match the model");
    std::vector<double> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) out[i] = predict_row(model, scores.row(i));
    return out;
}

std::vector<std::uint8_t> predict_labels(const std::vector<double>& probabilities) {
    std::vector<std::uint8_t> out(probabilities.size());
    std::transform(probabilities.begin(), probabilities.end(), out.begin(),
                   [](double p) { return static_cast<std::uint8_t>(p >= 0.5 ? 1 : 0); });
    return out;
}

std::map<std::string, WeightSign> weight_signs(const SparseLinearModel& model) {
    std::map<std::string, WeightSign> out;
    for (std::size_t j = 0; j < model.weights.size(); ++j) out.emplace(model.concept_ids[j], sign_of(model.weights[j]));
    return out;
}

double recompute_objective(const SparseLinearModel& model, const ScoreMatrix& scores, const LabeledDataset& data) {
    if (scores.image_ids() != data.image_ids) throw ValidationError("objective: scores and labels are not aligned");
    const LogisticProblem problem(scores.values(), scores.rows(), scores.cols(), data.labels, model.hyper.C);
    return problem.objective(model.weights, model.bias);
}

void save_model(const SparseLinearModel& model, const std::filesystem::path& path) {
    jsonio::json doc = {
        {"format_version", kModelFormatVersion},
        {"weights", model.weights},
        {"bias", model.bias},
        {"concept_ids", model.concept_ids},
        {"normalizer",
         {{"min", model.normalizer.min},
          {"max", model.normalizer.max},
          {"mode", model.normalizer.mode == NormalizerMode::Global ? "global" : "per-concept"}}},
        {"hyper", {{"C", model.hyper.C}, {"max_iter", model.hyper.max_iter}, {"seed", model.hyper.seed}}},
        {"vocab_hash", model.vocab_hash},
        {"training_meta",
         {{"dataset_tag", model.meta.dataset_tag},
          {"objective_value", model.meta.objective_value},
          {"nonzero_count", model.meta.nonzero_count},
          {"iterations", model.meta.iterations}}},
    };
    jsonio::write_file(path, doc);
}

SparseLinearModel load_model(const std::filesystem::path& path, const std::string& expected_vocab_hash) {
    const auto doc = jsonio::read_file(path);
    const std::string where = path.string();
    SparseLinearModel m;
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw ValidationError(where + ": unsupported model format_version " + std::to_string(version));
        m.weights = doc.at("weights").get<std::vector<double>>();
        m.bias = doc.at("bias").get<double>();
        m.concept_ids = doc.at("concept_ids").get<std::vector<std::string>>();
        const auto& norm = doc.at("normalizer");
        m.normalizer.concept_ids = m.concept_ids;
        m.normalizer.min = norm.at("min").get<std::vector<float>>();
        m.normalizer.max = norm.at("max").get<std::vector<float>>();
        m.normalizer.mode = norm.value("mode", "per-concept") == "global" ? NormalizerMode::Global
                                                                          : NormalizerMode::PerConcept;
        const auto& hyper = doc.at("hyper");
        m.hyper.C = hyper.at("C").get<double>();
        m.hyper.max_iter = hyper.at("max_iter").get<int>();
        m.hyper.seed = hyper.at("seed").get<std::uint64_t>();
        m.vocab_hash = doc.value("vocab_hash", "");
        const auto& meta = doc.at("training_meta");
        m.meta.dataset_tag = meta.value("dataset_tag", "");
        m.meta.objective_value = meta.at("objective_value").get<double>();
        m.meta.nonzero_count = meta.at("nonzero_count").get<std::size_t>();
        m.meta.iterations = meta.value("iterations", 0);
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(where + ": malformed model file: " + e.what());
    }
    const std::size_t n = m.concept_ids.size();
    if (m.weights.size() != n || m.normalizer.min.size() != n || m.normalizer.max.size() != n)
        throw ValidationError(where + ": weights/normalizer length does not match concept_ids");
    if (!std::isfinite(m.meta.objective_value)) throw ValidationError(where + ": non-finite objective_value");
    const auto nonzero = static_cast<std::size_t>(
        std::count_if(m.weights.begin(), m.weights.end(), [](double w) { return w != 0.0; }));
    if (nonzero != m.meta.nonzero_count) throw ValidationError(where + ": nonzero_count disagrees with the weights");
    if (!expected_vocab_hash.empty() && m.vocab_hash != expected_vocab_hash)
        throw ValidationError(where + ": model vocabulary hash " + m.vocab_hash +
                              " does not match the active vocabulary " + expected_vocab_hash);
    return m;
}

}  // namespace privlex
