#include "privlex/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "jsonio.hpp"
#include "privlex/error.hpp"

namespace privlex {

std::size_t surfaced_count(std::span<const float> scores, double tau) {
    const auto above = static_cast<std::size_t>(
        std::count_if(scores.begin(), scores.end(), [tau](float s) { return static_cast<double>(s) > tau; }));
    return std::min(std::max(above, kMinSurfaced), scores.size());
}

std::vector<std::size_t> top_k_indices(std::span<const float> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
    idx.resize(k);
    return idx;
}

Explanation explain_image(const SparseLinearModel& model, std::string image_id, std::span<const float> raw_row,
                          std::span<const float> norm_row, double tau, ThresholdTarget target) {
    const std::size_t n = model.weights.size();
    if (raw_row.size() != n || norm_row.size() != n)
        throw ValidationError("explain: score rows have " + std::to_string(raw_row.size()) + "/" +
                              std::to_string(norm_row.size()) + " entries, model has " + std::to_string(n));
    if (n < kMinSurfaced)
        throw ValidationError("explain: vocabulary of " + std::to_string(n) + " concepts is smaller than the minimum of " +
                              std::to_string(kMinSurfaced) + " surfaced concepts");
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("explain: tau must lie in (0, 1)");

    const auto ranked = target == ThresholdTarget::Raw ? raw_row : norm_row;
    Explanation e;
    e.image_id = std::move(image_id);
    e.tau = tau;
    e.k = surfaced_count(ranked, tau);
    e.private_probability = predict_row(model, norm_row);
    for (std::size_t j : top_k_indices(ranked, e.k))
        e.items.push_back({model.concept_ids[j], raw_row[j], sign_of(model.weights[j])});
    return e;
}

std::vector<Explanation> explain_all(const SparseLinearModel& model, const ScoreMatrix& raw, const ScoreMatrix& normalized,
                                     double tau, ThresholdTarget target) {
    if (raw.normalized() || !normalized.normalized())
        throw ValidationError("explain: expected one raw and one normalized score matrix");
    if (raw.image_ids() != normalized.image_ids() || raw.concept_ids() != normalized.concept_ids())
        throw ValidationError("explain: raw and normalized score matrices are not aligned");
    if (raw.concept_ids() != model.concept_ids)
        throw ValidationError("explain: score concept order does not match the model");
    std::vector<Explanation> out;
    out.reserve(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i)
        out.push_back(explain_image(model, raw.image_ids()[i], raw.row(i), normalized.row(i), tau, target));
    return out;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "text") return ReportFormat::Text;
    if (name == "json") return ReportFormat::Json;
    if (name == "html") return ReportFormat::Html;
    throw ValidationError("unknown report format '" + std::string(name) + "' (expected text, json or html)");
}

namespace {

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string_view label_name(std::uint8_t label) { return label ? "private" : "public"; }

std::string render_text(const std::vector<Explanation>& explanations,
                        const std::unordered_map<std::string_view, std::uint8_t>& truth) {
    std::string out;
    for (const auto& e : explanations) {
        out += e.image_id + "  p_private=" + fixed(e.private_probability);
        if (auto it = truth.find(e.image_id); it != truth.end()) out += "  label=" + std::string(label_name(it->second));
        out += "  k=" + std::to_string(e.k) + "\n";
        for (const auto& item : e.items)
            out += "  " + std::string(sign_marker(item.sign)) + " " + item.concept_id + "  " + fixed(item.raw_score) + "\n";
    }
    return out;
}

std::string render_json(const std::vector<Explanation>& explanations,
                        const std::unordered_map<std::string_view, std::uint8_t>& truth) {
    jsonio::json doc = jsonio::json::array();
    for (const auto& e : explanations) {
        jsonio::json items = jsonio::json::array();
        for (const auto& item : e.items)
            items.push_back({{"concept", item.concept_id},
                             {"score", static_cast<double>(item.raw_score)},
                             {"sign", std::string(sign_marker(item.sign))}});
        jsonio::json rec = {{"image_id", e.image_id}, {"p_private", e.private_probability}, {"k", e.k}, {"items", items}};
        if (auto it = truth.find(e.image_id); it != truth.end()) rec["label"] = std::string(label_name(it->second));
        doc.push_back(std::move(rec));
    }
    return jsonio::canonical(doc);
}

std::string render_html(const std::vector<Explanation>& explanations,
                        const std::unordered_map<std::string_view, std::uint8_t>& truth) {
    std::string out =
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>privlex explanations</title>\n<style>\n"
        "body { font-family: sans-serif; }\n"
        ".image { border: 1px solid #ccc; margin: 0.5em 0; padding: 0.5em; }\n"
        ".private { color: #e66100; }\n.public { color: #1a5fb4; }\n.zero { color: #8f5902; }\n"
        "</style>\n</head>\n<body>\n"
        "<p><span class=\"private\">+ private</span> <span class=\"public\">- public</span> "
        "<span class=\"zero\">0 zero weight</span></p>\n";
    for (const auto& e : explanations) {
        out += "<div class=\"image\">\n<h3>" + html_escape(e.image_id) + "</h3>\n<p>p(private) = " +
               fixed(e.private_probability);
        if (auto it = truth.find(e.image_id); it != truth.end())
            out += ", label: <span class=\"" + std::string(label_name(it->second)) + "\">" +
                   std::string(label_name(it->second)) + "</span>";
        out += ", k = " + std::to_string(e.k) + "</p>\n<ul>\n";
        for (const auto& item : e.items)
            out += "<li class=\"" + std::string(to_string(item.sign)) + "\">" + std::string(sign_marker(item.sign)) + " " +
                   html_escape(item.concept_id) + " (" + fixed(item.raw_score) + ")</li>\n";
        out += "</ul>\n</div>\n";
    }
    out += "</body>\n</html>\n";
    return out;
}

}  // namespace

std::string render_report(const std::vector<Explanation>& explanations, const LabeledDataset* labels,
                          ReportFormat format) {
    std::unordered_map<std::string_view, std::uint8_t> truth;
    if (labels)
        for (std::size_t i = 0; i < labels->size(); ++i) truth.emplace(labels->image_ids[i], labels->labels[i]);
    switch (format) {
        case ReportFormat::Text: return render_text(explanations, truth);
        case ReportFormat::Json: return render_json(explanations, truth);
        case ReportFormat::Html: return render_html(explanations, truth);
    }
    throw ValidationError("unknown report format");
}

}  // namespace privlex
