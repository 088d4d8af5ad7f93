#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace privlex {

/// One personal-data concept. `level` is 1..4 inside a hierarchy and 0 for a flat list.
struct Concept {
    std::string id;
    std::string name;
    std::string description;
    int level = 0;
    std::optional<std::string> parent_id;
    std::vector<std::string> examples;

    bool operator==(const Concept&) const = default;
};

enum class TemplateStyle {
    Description,               // "<name>: <description>"
    InformationAbout,          // "<name>: information about <name>"
    DescriptionWithExamples,   // "<name>: <description>, e.g. <examples>"
};

enum class SelectionMode { HierarchyRule, Flat };

struct PromptSentence {
    std::string concept_id;
    std::string text;

    bool operator==(const PromptSentence&) const = default;
};

/// Ordered, validated concept list. The order fixes the column order of every
/// score matrix and weight vector built from it.
class ConceptVocabulary {
public:
    /// Validates the invariants (unique ids, non-empty names, parents one level up)
    /// and throws ValidationError otherwise.
    ConceptVocabulary(std::vector<Concept> concepts, TemplateStyle style, std::string source_tag);

    [[nodiscard]] const std::vector<Concept>& concepts() const noexcept { return concepts_; }
    [[nodiscard]] std::size_t size() const noexcept { return concepts_.size(); }
    [[nodiscard]] TemplateStyle template_style() const noexcept { return style_; }
    [[nodiscard]] const std::string& source_tag() const noexcept { return source_tag_; }
    /// SHA-256 over the compiled prompt list.
    [[nodiscard]] const std::string& content_hash() const noexcept { return content_hash_; }
    [[nodiscard]] std::vector<std::string> ids() const;
    [[nodiscard]] const Concept* find(std::string_view id) const;

private:
    std::vector<Concept> concepts_;
    TemplateStyle style_;
    std::string source_tag_;
    std::string content_hash_;
};

/// Reads the JSON Lines vocabulary format. `source_tag` defaults to the file stem.
ConceptVocabulary load_vocabulary(const std::filesystem::path& path, TemplateStyle style,
                                  std::optional<std::string> source_tag = std::nullopt);

/// HierarchyRule keeps level-3 concepts plus level-2 concepts without a level-3 child,
/// and folds level-4 names into their parent's description as "(e.g., a, b)".
ConceptVocabulary select_bottleneck(const ConceptVocabulary& vocab, SelectionMode mode);

std::vector<PromptSentence> compile_prompts(const ConceptVocabulary& vocab);
std::string compile_prompt(const Concept& c, TemplateStyle style);

/// Hash of a compiled prompt list; equals ConceptVocabulary::content_hash() for the list it came from.
std::string hash_prompts(const std::vector<PromptSentence>& prompts);

void save_prompts(const std::vector<PromptSentence>& prompts, const std::filesystem::path& path);
std::vector<PromptSentence> load_prompts(const std::filesystem::path& path);

TemplateStyle parse_template_style(std::string_view name);
std::string_view to_string(TemplateStyle style);
SelectionMode parse_selection_mode(std::string_view name);

}  // namespace privlex
