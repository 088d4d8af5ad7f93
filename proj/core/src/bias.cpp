#include "privlex/bias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "privlex/error.hpp"

namespace privlex::bias {

BiasProfile scale_weights(const SparseLinearModel& model) {
    BiasProfile p{model.meta.dataset_tag, model.concept_ids, model.weights, model.vocab_hash};
    double peak = 0.0;
    for (double w : model.weights) peak = std::max(peak, std::abs(w));
    if (peak > 0.0)
        for (double& w : p.scaled) w /= peak;
    return p;
}

std::string_view to_string(Agreement a) noexcept {
    switch (a) {
        case Agreement::BothPrivate: return "both_private";
        case Agreement::BothPublic: return "both_public";
        case Agreement::Conflicting: return "conflicting";
        case Agreement::ZeroSomewhere: return "zero_somewhere";
    }
    return "zero_somewhere";
}

Agreement classify(const std::vector<double>& v) noexcept {
    if (v.empty() || std::any_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return Agreement::ZeroSomewhere;
    if (std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; })) return Agreement::BothPrivate;
    if (std::all_of(v.begin(), v.end(), [](double x) { return x < 0.0; })) return Agreement::BothPublic;
    return Agreement::Conflicting;
}

Comparison compare(const std::vector<BiasProfile>& profiles) {
    if (profiles.empty()) throw ValidationError("bias: no models to compare");
    const auto& ref = profiles.front();
    for (const auto& p : profiles) {
        if (p.scaled.size() != p.concept_ids.size()) throw ValidationError("bias: profile '" + p.dataset_tag + "' is malformed");
        if (!ref.vocab_hash.empty() && !p.vocab_hash.empty() && p.vocab_hash != ref.vocab_hash)
            throw ValidationError("bias: models '" + ref.dataset_tag + "' and '" + p.dataset_tag +
                                  "' were trained on different vocabularies");
        if (p.concept_ids != ref.concept_ids)
            throw ValidationError("bias: models '" + ref.dataset_tag + "' and '" + p.dataset_tag +
                                  "' use different concept orders");
    }

    Comparison cmp;
    // Repeated tags get a "#n" suffix so CSV columns stay distinguishable.
    for (const auto& p : profiles) {
        const auto seen = std::count_if(profiles.begin(), profiles.begin() + static_cast<std::ptrdiff_t>(cmp.dataset_tags.size()),
                                        [&](const BiasProfile& q) { return q.dataset_tag == p.dataset_tag; });
        cmp.dataset_tags.push_back(seen ? p.dataset_tag + "#" + std::to_string(seen + 1) : p.dataset_tag);
    }
    for (std::size_t j = 0; j < ref.concept_ids.size(); ++j) {
        ComparisonRow row;
        row.concept_id = ref.concept_ids[j];
        for (const auto& p : profiles) {
            row.scaled.push_back(p.scaled[j]);
            row.max_magnitude = std::max(row.max_magnitude, std::abs(p.scaled[j]));
        }
        row.agreement = classify(row.scaled);
        cmp.rows.push_back(std::move(row));
    }
    std::stable_sort(cmp.rows.begin(), cmp.rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.max_magnitude > b.max_magnitude; });
    return cmp;
}

namespace {

std::string num(double v, const char* fmt = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#e66100", "#1a5fb4", "#2ec27e", "#9141ac", "#c01c28", "#865e3c"};

}  // namespace

std::string to_csv(const Comparison& cmp) {
    std::string out = "concept_id";
    for (const auto& t : cmp.dataset_tags) out += "," + csv_field(t);
    out += ",agreement\n";
    for (const auto& row : cmp.rows) {
        out += csv_field(row.concept_id);
        for (double v : row.scaled) out += "," + num(v);
        out += "," + std::string(to_string(row.agreement)) + "\n";
    }
    return out;
}

std::string to_svg(const Comparison& cmp, std::size_t max_concepts) {
    const std::size_t n = std::min(max_concepts, cmp.rows.size());
    const std::size_t d = cmp.dataset_tags.size();
    const double bar_h = 8.0, gap = 6.0, label_w = 220.0, half_w = 200.0, top = 30.0;
    const double group_h = bar_h * static_cast<double>(d) + gap;
    const double width = label_w + 2 * half_w + 20.0;
    const double height = top + group_h * static_cast<double>(n) + 20.0;
    const double axis_x = label_w + half_w;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width, "%.0f") + "\" height=\"" +
                      num(height, "%.0f") + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (std::size_t t = 0; t < d; ++t) {
        const double x = label_w + 120.0 * static_cast<double>(t);
        out += "<rect x=\"" + num(x, "%.1f") + "\" y=\"8\" width=\"10\" height=\"10\" fill=\"" + kPalette[t % 6] + "\"/>\n";
        out += "<text x=\"" + num(x + 14, "%.1f") + "\" y=\"17\">" + xml_escape(cmp.dataset_tags[t]) + "</text>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = cmp.rows[i];
        const double y0 = top + group_h * static_cast<double>(i);
        out += "<text x=\"" + num(label_w - 6, "%.1f") + "\" y=\"" + num(y0 + bar_h * static_cast<double>(d) / 2 + 3, "%.1f") +
               "\" text-anchor=\"end\">" + xml_escape(row.concept_id) + "</text>\n";
        for (std::size_t t = 0; t < d; ++t) {
            const double v = row.scaled[t];
            const double w = std::abs(v) * half_w;
            const double x = v >= 0 ? axis_x : axis_x - w;
            out += "<rect x=\"" + num(x, "%.2f") + "\" y=\"" + num(y0 + bar_h * static_cast<double>(t), "%.1f") +
                   "\" width=\"" + num(w, "%.2f") + "\" height=\"" + num(bar_h - 1, "%.1f") + "\" fill=\"" +
                   kPalette[t % 6] + "\"/>\n";
        }
    }
    out += "<line x1=\"" + num(axis_x, "%.1f") + "\" y1=\"" + num(top - 4, "%.1f") + "\" x2=\"" + num(axis_x, "%.1f") +
           "\" y2=\"" + num(height - 16, "%.1f") + "\" stroke=\"#333\"/>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace privlex::bias
