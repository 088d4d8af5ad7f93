#include "privlex/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "jsonio.hpp"
#include "privlex/error.hpp"
#include "privlex/metrics.hpp"

namespace privlex::zeroshot {

ConceptAnnotations load_annotations(const std::filesystem::path& path, const std::vector<std::string>* vocabulary) {
    std::set<std::string_view> known;
    if (vocabulary) known.insert(vocabulary->begin(), vocabulary->end());
    ConceptAnnotations out;
    jsonio::for_each_line(path, [&](const jsonio::json& rec, std::size_t lineno) {
        const std::string loc = path.string() + ":" + std::to_string(lineno);
        std::string id;
        std::vector<std::string> concepts;
        try {
            id = rec.at("image_id").get<std::string>();
            concepts = rec.at("concepts").get<std::vector<std::string>>();
        } catch (const jsonio::json::exception& e) {
            throw ValidationError(loc + ": malformed annotation record: " + e.what());
        }
        if (vocabulary)
            for (const auto& c : concepts)
                if (!known.contains(c)) throw ValidationError(loc + ": concept '" + c + "' is not in the active vocabulary");
        auto [it, fresh] = out.present.emplace(id, std::set<std::string>(concepts.begin(), concepts.end()));
        if (!fresh) throw ValidationError(loc + ": duplicate image id '" + id + "'");
    });
    return out;
}

const ThresholdEntry* ThresholdTable::find(const std::string& concept_id) const {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ThresholdEntry& e) { return e.concept_id == concept_id; });
    return it == entries.end() ? nullptr : &*it;
}

namespace {

double ba_of(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    return metrics::report({tp, fp, tn, fn}).ba;
}

// Image rows of `scores` that are annotated, in score order.
std::vector<std::size_t> annotated_rows(const ScoreMatrix& scores, const ConceptAnnotations& annotations) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < scores.rows(); ++i)
        if (annotations.has_image(scores.image_ids()[i])) rows.push_back(i);
    return rows;
}

}  // namespace

CalibrationResult calibrate_concept(std::span<const double> scores, std::span<const std::uint8_t> present) {
    if (scores.size() != present.size()) throw ValidationError("calibrate: score/label length mismatch");
    const auto positives = static_cast<std::uint64_t>(std::count(present.begin(), present.end(), std::uint8_t{1}));
    const auto negatives = static_cast<std::uint64_t>(present.size()) - positives;
    if (positives == 0 || negatives == 0)
        throw ValidationError("calibrate: a concept needs both positive and negative examples");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Distinct values ascending with the class counts at each value.
    std::vector<double> values;
    std::vector<std::uint64_t> pos_at, neg_at;
    for (std::size_t k : order) {
        if (values.empty() || scores[k] != values.back()) {
            values.push_back(scores[k]);
            pos_at.push_back(0);
            neg_at.push_back(0);
        }
        (present[k] ? pos_at : neg_at).back() += 1;
    }
    if (values.size() == 1) return {values.front(), ba_of(0, 0, negatives, positives)};

    // Candidate c sits between values[c] and values[c + 1]; everything above it is detected.
    std::vector<double> ba(values.size() - 1);
    std::uint64_t pos_below = 0, neg_below = 0;
    for (std::size_t c = 0; c + 1 < values.size(); ++c) {
        pos_below += pos_at[c];
        neg_below += neg_at[c];
        ba[c] = ba_of(positives - pos_below, negatives - neg_below, neg_below, pos_below);
    }
    const double best = *std::max_element(ba.begin(), ba.end());
    // Every split is worse than chance (anti-correlated concept): detecting nothing is optimal.
    const double none = ba_of(0, 0, negatives, positives);
    if (best < none) return {values.back(), none};
    std::vector<std::size_t> optimal;
    for (std::size_t c = 0; c < ba.size(); ++c)
        if (ba[c] == best) optimal.push_back(c);
    const std::size_t pick = optimal[(optimal.size() - 1) / 2];
    std::size_t first = pick, last = pick;
    while (first > 0 && ba[first - 1] == best) --first;
    while (last + 1 < ba.size() && ba[last + 1] == best) ++last;
    return {0.5 * (values[first] + values[last + 1]), best};
}

ThresholdTable calibrate_thresholds(const ScoreMatrix& train_scores, const ConceptAnnotations& annotations,
                                    std::string description_style_tag) {
    if (train_scores.normalized()) throw ValidationError("calibrate_thresholds expects raw scores");
    const auto rows = annotated_rows(train_scores, annotations);
    if (rows.empty()) throw ValidationError("calibrate_thresholds: no annotated images in the score matrix");

    ThresholdTable table;
    table.description_style_tag = std::move(description_style_tag);
    std::vector<double> column(rows.size());
    std::vector<std::uint8_t> present(rows.size());
    for (std::size_t j = 0; j < train_scores.cols(); ++j) {
        const auto& cid = train_scores.concept_ids()[j];
        std::size_t pos = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            column[r] = train_scores.at(rows[r], j);
            present[r] = annotations.present.at(train_scores.image_ids()[rows[r]]).contains(cid) ? 1 : 0;
            pos += present[r];
        }
        if (pos == 0) {
            table.skipped.push_back({cid, "no positive training images"});
            continue;
        }
        if (pos == rows.size()) {
            table.skipped.push_back({cid, "no negative training images"});
            continue;
        }
        const auto fit = calibrate_concept(column, present);
        table.entries.push_back({cid, fit.threshold, fit.ba});
    }
    return table;
}

std::set<std::string> detect(std::span<const float> scores_row, const std::vector<std::string>& concept_ids,
                             const ThresholdTable& table, std::vector<std::string>* missing) {
    if (scores_row.size() != concept_ids.size()) throw ValidationError("detect: row length does not match concept ids");
    std::set<std::string> out;
    for (std::size_t j = 0; j < concept_ids.size(); ++j) {
        const auto* entry = table.find(concept_ids[j]);
        if (!entry) {
            if (missing) missing->push_back(concept_ids[j]);
            continue;
        }
        if (static_cast<double>(scores_row[j]) > entry->threshold) out.insert(concept_ids[j]);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DetectionEvaluation evaluate_detection(const ScoreMatrix& test_scores, const ConceptAnnotations& annotations,
                                       const ThresholdTable& table) {
    if (test_scores.normalized()) throw ValidationError("evaluate_detection expects raw scores");
    const auto rows = annotated_rows(test_scores, annotations);
    if (rows.empty()) throw ValidationError("evaluate_detection: no annotated images in the score matrix");

    DetectionEvaluation eval;
    eval.description_style_tag = table.description_style_tag;
    std::vector<double> bas;
    for (std::size_t j = 0; j < test_scores.cols(); ++j) {
        const auto& cid = test_scores.concept_ids()[j];
        const auto* entry = table.find(cid);
        if (!entry) continue;
        metrics::ConfusionCounts counts;
        for (std::size_t r : rows) {
            const bool truth = annotations.present.at(test_scores.image_ids()[r]).contains(cid);
            const bool pred = static_cast<double>(test_scores.at(r, j)) > entry->threshold;
            if (pred && truth) ++counts.tp;
            else if (pred) ++counts.fp;
            else if (truth) ++counts.fn;
            else ++counts.tn;
        }
        const auto rep = metrics::report(counts);
        ConceptDetectionMetrics m{cid, rep.ba, rep.p_priv, rep.r_priv, counts.tp + counts.fn, counts.tn + counts.fp};
        if (m.positives == 0 || m.negatives == 0) {
            eval.excluded.push_back(cid);
            continue;
        }
        bas.push_back(m.ba);
        eval.per_concept.push_back(std::move(m));
    }
    if (!bas.empty()) {
        eval.mean_ba = std::accumulate(bas.begin(), bas.end(), 0.0) / static_cast<double>(bas.size());
        eval.median_ba = median(bas);
    }
    return eval;
}

StyleComparison compare_styles(const DetectionEvaluation& a, const DetectionEvaluation& b) {
    StyleComparison cmp{a.description_style_tag, b.description_style_tag, {}, 0, 0};
    std::unordered_map<std::string_view, double> b_ba;
    for (const auto& m : b.per_concept) b_ba.emplace(m.concept_id, m.ba);
    std::vector<double> deltas, abs_deltas;
    for (const auto& m : a.per_concept) {
        auto it = b_ba.find(m.concept_id);
        if (it == b_ba.end()) continue;
        const double d = m.ba - it->second;
        cmp.deltas.push_back({m.concept_id, m.ba, it->second, d});
        deltas.push_back(d);
        abs_deltas.push_back(std::abs(d));
    }
    cmp.median_delta = median(deltas);
    cmp.median_abs_delta = median(abs_deltas);
    return cmp;
}

void save_thresholds(const ThresholdTable& table, const std::filesystem::path& path) {
    jsonio::json entries = jsonio::json::array(), skipped = jsonio::json::array();
    for (const auto& e : table.entries)
        entries.push_back({{"concept_id", e.concept_id}, {"threshold", e.threshold}, {"train_ba", e.train_ba}});
    for (const auto& s : table.skipped) skipped.push_back({{"concept_id", s.concept_id}, {"reason", s.reason}});
    jsonio::write_file(path, {{"description_style_tag", table.description_style_tag},
                              {"thresholds", entries},
                              {"skipped", skipped}});
}

ThresholdTable load_thresholds(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    ThresholdTable t;
    try {
        t.description_style_tag = doc.value("description_style_tag", "");
        for (const auto& e : doc.at("thresholds"))
            t.entries.push_back({e.at("concept_id").get<std::string>(), e.at("threshold").get<double>(),
                                 e.at("train_ba").get<double>()});
        if (doc.contains("skipped"))
            for (const auto& s : doc.at("skipped"))
                t.skipped.push_back({s.at("concept_id").get<std::string>(), s.value("reason", "")});
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(path.string() + ": malformed threshold table: " + e.what());
    }
    for (const auto& e : t.entries)
        if (!std::isfinite(e.threshold)) throw ValidationError(path.string() + ": non-finite threshold for " + e.concept_id);
    return t;
}

void save_evaluation(const DetectionEvaluation& eval, const std::filesystem::path& path) {
    jsonio::json per = jsonio::json::array();
    for (const auto& m : eval.per_concept)
        per.push_back({{"concept_id", m.concept_id}, {"ba", m.ba}, {"precision", m.precision}, {"recall", m.recall},
                       {"positives", m.positives}, {"negatives", m.negatives}});
    jsonio::write_file(path, {{"description_style_tag", eval.description_style_tag},
                              {"per_concept", per},
                              {"excluded", eval.excluded},
                              {"mean_ba", eval.mean_ba},
                              {"median_ba", eval.median_ba}});
}

DetectionEvaluation load_evaluation(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    DetectionEvaluation eval;
    try {
        eval.description_style_tag = doc.value("description_style_tag", "");
        for (const auto& m : doc.at("per_concept"))
            eval.per_concept.push_back({m.at("concept_id").get<std::string>(), m.at("ba").get<double>(),
                                        m.at("precision").get<double>(), m.at("recall").get<double>(),
                                        m.at("positives").get<std::size_t>(), m.at("negatives").get<std::size_t>()});
        eval.excluded = doc.value("excluded", std::vector<std::string>{});
        eval.mean_ba = doc.at("mean_ba").get<double>();
        eval.median_ba = doc.at("median_ba").get<double>();
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(path.string() + ": malformed detection evaluation: " + e.what());
    }
    return eval;
}

void save_comparison(const StyleComparison& cmp, const std::filesystem::path& path) {
    jsonio::json deltas = jsonio::json::array();
    for (const auto& d : cmp.deltas)
        deltas.push_back({{"concept_id", d.concept_id}, {"ba_a", d.ba_a}, {"ba_b", d.ba_b}, {"delta", d.delta}});
    jsonio::write_file(path, {{"style_a", cmp.style_a},
                              {"style_b", cmp.style_b},
                              {"deltas", deltas},
                              {"median_delta", cmp.median_delta},
                              {"median_abs_delta", cmp.median_abs_delta}});
}

}  // namespace privlex::zeroshot
