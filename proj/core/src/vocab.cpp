#include "privlex/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>

#include "jsonio.hpp"
#include "privlex/error.hpp"
#include "privlex/hashing.hpp"

namespace privlex {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void check_parents(const std::vector<Concept>& concepts, const std::vector<std::size_t>* lines,
                   const std::string& where) {
    std::unordered_map<std::string_view, const Concept*> by_id;
    for (const auto& c : concepts) by_id.emplace(c.id, &c);
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        const auto& c = concepts[i];
        if (!c.parent_id) continue;
        const std::string loc = lines ? where + ":" + std::to_string((*lines)[i]) : where;
        auto it = by_id.find(*c.parent_id);
        if (it == by_id.end())
            throw ValidationError(loc + ": concept '" + c.id + "' has dangling parent_id '" + *c.parent_id + "'");
        if (it->second->level != c.level - 1)
            throw ValidationError(loc + ": concept '" + c.id + "' (level " + std::to_string(c.level) +
                                  ") has parent '" + *c.parent_id + "' at level " +
                                  std::to_string(it->second->level) + "; expected exactly one level up");
    }
}

Concept parse_concept(const jsonio::json& rec, const std::string& loc) {
    if (!rec.is_object()) throw ValidationError(loc + ": malformed record: expected a JSON object");
    Concept c;
    try {
        c.id = rec.at("id").get<std::string>();
        c.name = rec.at("name").get<std::string>();
        if (auto it = rec.find("description"); it != rec.end() && !it->is_null())
            c.description = it->get<std::string>();
        if (auto it = rec.find("level"); it != rec.end() && !it->is_null()) c.level = it->get<int>();
        if (auto it = rec.find("parent_id"); it != rec.end() && !it->is_null())
            c.parent_id = it->get<std::string>();
        if (auto it = rec.find("examples"); it != rec.end() && !it->is_null())
            c.examples = it->get<std::vector<std::string>>();
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(loc + ": malformed record: " + e.what());
    }
    if (c.id.empty()) throw ValidationError(loc + ": malformed record: empty id");
    if (c.name.empty()) throw ValidationError(loc + ": concept '" + c.id + "' has an empty name");
    if (c.level < 0 || c.level > 4)
        throw ValidationError(loc + ": concept '" + c.id + "' has level " + std::to_string(c.level) +
                              " outside 0..4");
    return c;
}

std::string fold_examples(std::string description, const std::string& name,
                          const std::vector<std::string>& children) {
    const std::string haystack = lower(description);
    std::vector<std::string> missing;
    for (const auto& child : children)
        if (haystack.find(lower(child)) == std::string::npos) missing.push_back(child);
    if (missing.empty()) return description;

    if (description.empty()) description = "Information about " + name + ".";
    bool had_period = false;
    while (!description.empty() && (description.back() == ' ' || description.back() == '.')) {
        had_period = had_period || description.back() == '.';
        description.pop_back();
    }
    description += " (e.g., " + join(missing, ", ") + ")";
    if (had_period) description += ".";
    return description;
}

}  // namespace

ConceptVocabulary::ConceptVocabulary(std::vector<Concept> concepts, TemplateStyle style, std::string source_tag)
    : concepts_(std::move(concepts)), style_(style), source_tag_(std::move(source_tag)) {
    std::set<std::string_view> seen;
    for (const auto& c : concepts_) {
        if (c.id.empty()) throw ValidationError("vocabulary: concept with empty id");
        if (c.name.empty()) throw ValidationError("vocabulary: concept '" + c.id + "' has an empty name");
        if (!seen.insert(c.id).second) throw ValidationError("vocabulary: duplicate concept id '" + c.id + "'");
    }
    check_parents(concepts_, nullptr, "vocabulary");
    content_hash_ = hash_prompts(compile_prompts(*this));
}

std::vector<std::string> ConceptVocabulary::ids() const {
    std::vector<std::string> out;
    out.reserve(concepts_.size());
    for (const auto& c : concepts_) out.push_back(c.id);
    return out;
}

const Concept* ConceptVocabulary::find(std::string_view id) const {
    auto it = std::find_if(concepts_.begin(), concepts_.end(), [&](const Concept& c) { return c.id == id; });
    return it == concepts_.end() ? nullptr : &*it;
}

ConceptVocabulary load_vocabulary(const std::filesystem::path& path, TemplateStyle style,
                                  std::optional<std::string> source_tag) {
    std::vector<Concept> concepts;
    std::vector<std::size_t> lines;
    std::map<std::string, std::size_t> first_line;
    const std::string where = path.string();
    jsonio::for_each_line(path, [&](const jsonio::json& rec, std::size_t lineno) {
        const std::string loc = where + ":" + std::to_string(lineno);
        Concept c = parse_concept(rec, loc);
        if (auto [it, fresh] = first_line.emplace(c.id, lineno); !fresh)
            throw ValidationError(loc + ": duplicate concept id '" + c.id + "' (first defined on line " +
                                  std::to_string(it->second) + ")");
        concepts.push_back(std::move(c));
        lines.push_back(lineno);
    });
    check_parents(concepts, &lines, where);
    return ConceptVocabulary(std::move(concepts), style, source_tag.value_or(path.stem().string()));
}

ConceptVocabulary select_bottleneck(const ConceptVocabulary& vocab, SelectionMode mode) {
    if (mode == SelectionMode::Flat) return vocab;

    const auto& all = vocab.concepts();
    if (all.empty() || std::all_of(all.begin(), all.end(), [](const Concept& c) { return c.level == 0; }))
        throw ValidationError("hierarchy selection requires concept levels 1..4; vocabulary '" +
                              vocab.source_tag() + "' is flat");
    for (const auto& c : all)
        if (c.level == 0)
            throw ValidationError("hierarchy selection: concept '" + c.id + "' has no level");

    std::map<std::string, std::vector<const Concept*>> children;
    for (const auto& c : all)
        if (c.parent_id) children[*c.parent_id].push_back(&c);
    auto has_child_at = [&](const Concept& c, int level) {
        auto it = children.find(c.id);
        if (it == children.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(), [&](const Concept* k) { return k->level == level; });
    };

    std::vector<Concept> kept;
    for (const auto& c : all) {
        const bool keep = c.level == 3 || (c.level == 2 && !has_child_at(c, 3));
        if (!keep) continue;
        Concept out = c;
        std::vector<std::string> folded;
        if (auto it = children.find(c.id); it != children.end())
            for (const Concept* k : it->second)
                if (k->level == 4) folded.push_back(k->name);
        if (!folded.empty()) {
            out.description = fold_examples(out.description, out.name, folded);
            for (const auto& f : folded)
                if (std::find(out.examples.begin(), out.examples.end(), f) == out.examples.end())
                    out.examples.push_back(f);
        }
        // Parents are level 1/2 and no longer in the bottleneck.
        out.parent_id.reset();
        kept.push_back(std::move(out));
    }
    return ConceptVocabulary(std::move(kept), vocab.template_style(), vocab.source_tag());
}

std::string compile_prompt(const Concept& c, TemplateStyle style) {
    const std::string info = c.name + ": information about " + c.name;
    switch (style) {
        case TemplateStyle::InformationAbout:
            return info;
        case TemplateStyle::Description:
            return c.description.empty() ? info : c.name + ": " + c.description;
        case TemplateStyle::DescriptionWithExamples: {
            std::string text = c.description.empty() ? info : c.name + ": " + c.description;
            if (!c.examples.empty()) {
                if (text.ends_with('.')) text.pop_back();
                text += ", e.g. " + join(c.examples, ", ");
            }
            return text;
        }
    }
    return info;
}

std::vector<PromptSentence> compile_prompts(const ConceptVocabulary& vocab) {
    std::vector<PromptSentence> out;
    out.reserve(vocab.size());
    for (const auto& c : vocab.concepts()) out.push_back({c.id, compile_prompt(c, vocab.template_style())});
    return out;
}

std::string hash_prompts(const std::vector<PromptSentence>& prompts) {
    Sha256 h;
    for (const auto& p : prompts) {
        h.update(p.concept_id).update(std::string_view("\t", 1)).update(p.text).update(std::string_view("\n", 1));
    }
    return h.digest();
}

void save_prompts(const std::vector<PromptSentence>& prompts, const std::filesystem::path& path) {
    std::string text;
    for (const auto& p : prompts) {
        jsonio::json rec = {{"concept_id", p.concept_id}, {"text", p.text}};
        text += rec.dump() + "\n";
    }
    jsonio::write_text(path, text);
}

std::vector<PromptSentence> load_prompts(const std::filesystem::path& path) {
    std::vector<PromptSentence> out;
    std::set<std::string> seen;
    jsonio::for_each_line(path, [&](const jsonio::json& rec, std::size_t lineno) {
        const std::string loc = path.string() + ":" + std::to_string(lineno);
        PromptSentence p;
        try {
            p.concept_id = rec.at("concept_id").get<std::string>();
            p.text = rec.at("text").get<std::string>();
        } catch (const jsonio::json::exception& e) {
            throw ValidationError(loc + ": malformed prompt record: " + e.what());
        }
        if (p.text.empty()) throw ValidationError(loc + ": empty prompt text");
        if (!seen.insert(p.concept_id).second)
            throw ValidationError(loc + ": duplicate concept id '" + p.concept_id + "'");
        out.push_back(std::move(p));
    });
    return out;
}

TemplateStyle parse_template_style(std::string_view name) {
    const std::string n = lower(name);
    if (n == "description") return TemplateStyle::Description;
    if (n == "information-about" || n == "info") return TemplateStyle::InformationAbout;
    if (n == "description-examples" || n == "examples") return TemplateStyle::DescriptionWithExamples;
    throw ValidationError("unknown template style '" + std::string(name) +
                          "' (expected description, information-about, description-examples)");
}

std::string_view to_string(TemplateStyle style) {
    switch (style) {
        case TemplateStyle::Description: return "description";
        case TemplateStyle::InformationAbout: return "information-about";
        case TemplateStyle::DescriptionWithExamples: return "description-examples";
    }
    return "description";
}

SelectionMode parse_selection_mode(std::string_view name) {
    const std::string n = lower(name);
    if (n == "hierarchy") return SelectionMode::HierarchyRule;
    if (n == "flat") return SelectionMode::Flat;
    throw ValidationError("unknown selection mode '" + std::string(name) + "' (expected hierarchy or flat)");
}

}  // namespace privlex
