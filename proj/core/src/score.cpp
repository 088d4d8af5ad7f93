#include "privlex/score.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "jsonio.hpp"
#include "privlex/error.hpp"

namespace privlex {

namespace {
constexpr float kRawSlack = 1e-6F;

std::vector<double> row_norms(const EmbeddingMatrix& m, const char* what) {
    std::vector<double> norms(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (float v : m.row(i)) acc += static_cast<double>(v) * v;
        norms[i] = std::sqrt(acc);
        if (norms[i] == 0.0) throw ValidationError(std::string(what) + " embedding '" + m.ids()[i] + "' has zero norm");
    }
    return norms;
}
}  // namespace

ScoreMatrix::ScoreMatrix(std::vector<std::string> image_ids, std::vector<std::string> concept_ids,
                         std::vector<float> values, bool normalized, std::string vocab_hash)
    : image_ids_(std::move(image_ids)), concept_ids_(std::move(concept_ids)), values_(std::move(values)),
      normalized_(normalized), vocab_hash_(std::move(vocab_hash)) {
    if (values_.size() != image_ids_.size() * concept_ids_.size())
        throw ValidationError("score matrix: " + std::to_string(values_.size()) + " values for a " +
                              std::to_string(image_ids_.size()) + "x" + std::to_string(concept_ids_.size()) + " shape");
    std::unordered_set<std::string_view> seen;
    for (const auto& id : image_ids_)
        if (!seen.insert(id).second) throw ValidationError("score matrix: duplicate image id '" + id + "'");
    seen.clear();
    for (const auto& id : concept_ids_)
        if (!seen.insert(id).second) throw ValidationError("score matrix: duplicate concept id '" + id + "'");
    const float lo = normalized_ ? 0.0F : -1.0F - kRawSlack;
    const float hi = normalized_ ? 1.0F : 1.0F + kRawSlack;
    for (std::size_t k = 0; k < values_.size(); ++k) {
        const float v = values_[k];
        if (!(v >= lo && v <= hi))
            throw ValidationError("score matrix: value " + std::to_string(v) + " for image '" +
                                  image_ids_[k / concept_ids_.size()] + "' outside the " +
                                  (normalized_ ? "normalized [0,1]" : "raw [-1,1]") + " range");
    }
}

ScoreMatrix ScoreMatrix::select_rows(const std::vector<std::string>& ids) const {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < image_ids_.size(); ++i) index.emplace(image_ids_[i], i);
    std::vector<float> values;
    values.reserve(ids.size() * cols());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw ValidationError("score matrix has no row for image '" + id + "'");
        auto r = row(it->second);
        values.insert(values.end(), r.begin(), r.end());
    }
    return ScoreMatrix(ids, concept_ids_, std::move(values), normalized_, vocab_hash_);
}

ScoreMatrix cosine_scores(const EmbeddingMatrix& images, const EmbeddingMatrix& concepts, std::string vocab_hash,
                          unsigned threads) {
    if (images.rows() > 0 && concepts.rows() > 0 && images.dim() != concepts.dim())
        throw ValidationError("cosine scores: image dim " + std::to_string(images.dim()) + " != concept dim " +
                              std::to_string(concepts.dim()));
    const auto inorm = row_norms(images, "image");
    const auto tnorm = row_norms(concepts, "concept");
    const std::size_t n = images.rows(), m = concepts.rows(), d = images.dim();
    std::vector<float> values(n * m);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const float* a = images.row(i).data();
            for (std::size_t j = 0; j < m; ++j) {
                const float* b = concepts.row(j).data();
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(a[k]) * b[k];
                values[i * m + j] = static_cast<float>(std::clamp(dot / (inorm[i] * tnorm[j]), -1.0, 1.0));
            }
        }
    };
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }
    return ScoreMatrix(images.ids(), concepts.ids(), std::move(values), false, std::move(vocab_hash));
}

Normalizer fit_normalizer(const ScoreMatrix& train, NormalizerMode mode) {
    if (train.normalized()) throw ValidationError("fit_normalizer expects raw scores");
    if (train.rows() == 0 || train.cols() == 0) throw ValidationError("fit_normalizer: empty score matrix");
    Normalizer norm{train.concept_ids(), std::vector<float>(train.cols()), std::vector<float>(train.cols()), mode};
    for (std::size_t j = 0; j < train.cols(); ++j) norm.min[j] = norm.max[j] = train.at(0, j);
    for (std::size_t i = 1; i < train.rows(); ++i)
        for (std::size_t j = 0; j < train.cols(); ++j) {
            norm.min[j] = std::min(norm.min[j], train.at(i, j));
            norm.max[j] = std::max(norm.max[j], train.at(i, j));
        }
    if (mode == NormalizerMode::Global) {
        const float lo = *std::min_element(norm.min.begin(), norm.min.end());
        const float hi = *std::max_element(norm.max.begin(), norm.max.end());
        std::fill(norm.min.begin(), norm.min.end(), lo);
        std::fill(norm.max.begin(), norm.max.end(), hi);
    }
    return norm;
}

float normalize_value(float v, float lo, float hi) {
    if (hi == lo) return 0.5F;
    const double t = (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo);
    return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

ScoreMatrix apply_normalizer(const Normalizer& norm, const ScoreMatrix& scores) {
    if (scores.normalized()) throw ValidationError("apply_normalizer expects raw scores");
    if (scores.concept_ids() != norm.concept_ids)
        throw ValidationError("apply_normalizer: concept order of the scores does not match the normalizer");
    std::vector<float> out(scores.values().size());
    const std::size_t m = scores.cols();
    for (std::size_t i = 0; i < scores.rows(); ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = normalize_value(scores.at(i, j), norm.min[j], norm.max[j]);
    return ScoreMatrix(scores.image_ids(), scores.concept_ids(), std::move(out), true, scores.vocab_hash());
}

void save_normalizer(const Normalizer& norm, const std::filesystem::path& path) {
    jsonio::json doc = {{"format_version", 1},
                        {"concept_ids", norm.concept_ids},
                        {"min", norm.min},
                        {"max", norm.max},
                        {"mode", norm.mode == NormalizerMode::Global ? "global" : "per-concept"}};
    jsonio::write_file(path, doc);
}

Normalizer load_normalizer(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    Normalizer norm;
    try {
        norm.concept_ids = doc.at("concept_ids").get<std::vector<std::string>>();
        norm.min = doc.at("min").get<std::vector<float>>();
        norm.max = doc.at("max").get<std::vector<float>>();
        norm.mode = doc.value("mode", "per-concept") == "global" ? NormalizerMode::Global : NormalizerMode::PerConcept;
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(path.string() + ": malformed normalizer: " + e.what());
    }
    if (norm.min.size() != norm.concept_ids.size() || norm.max.size() != norm.concept_ids.size())
        throw ValidationError(path.string() + ": normalizer bounds do not match the concept count");
    for (std::size_t j = 0; j < norm.min.size(); ++j)
        if (!(norm.min[j] <= norm.max[j]))
            throw ValidationError(path.string() + ": normalizer min > max for '" + norm.concept_ids[j] + "'");
    return norm;
}

std::filesystem::path concepts_sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".concepts.json");
}

void save_scores(const ScoreMatrix& scores, const std::filesystem::path& path) {
    pvx1::write(path, static_cast<std::uint32_t>(scores.rows()), static_cast<std::uint32_t>(scores.cols()),
                scores.values());
    write_id_list(scores.image_ids(), pvx1::ids_sidecar(path));
    jsonio::json meta = {{"concept_ids", scores.concept_ids()},
                         {"normalized", scores.normalized()},
                         {"vocab_hash", scores.vocab_hash()}};
    jsonio::write_file(concepts_sidecar(path), meta);
}

ScoreMatrix load_scores(const std::filesystem::path& path) {
    auto raw = pvx1::read(path);
    auto image_ids = read_id_list(pvx1::ids_sidecar(path));
    const auto meta = jsonio::read_file(concepts_sidecar(path));
    std::vector<std::string> concept_ids;
    bool normalized = false;
    std::string vocab_hash;
    try {
        concept_ids = meta.at("concept_ids").get<std::vector<std::string>>();
        normalized = meta.at("normalized").get<bool>();
        vocab_hash = meta.value("vocab_hash", "");
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(concepts_sidecar(path).string() + ": malformed score sidecar: " + e.what());
    }
    if (image_ids.size() != raw.rows || concept_ids.size() != raw.dim)
        throw ValidationError(path.string() + ": sidecars describe a " + std::to_string(image_ids.size()) + "x" +
                              std::to_string(concept_ids.size()) + " matrix but the payload is " +
                              std::to_string(raw.rows) + "x" + std::to_string(raw.dim));
    return ScoreMatrix(std::move(image_ids), std::move(concept_ids), std::move(raw.data), normalized,
                       std::move(vocab_hash));
}

}  // namespace privlex
