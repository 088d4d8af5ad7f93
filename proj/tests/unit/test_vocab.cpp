#include <doctest.h>

#include <fstream>

#include "privlex/error.hpp"
#include "privlex/vocab.hpp"
#include "synthetic.hpp"

using namespace privlex;
namespace fs = std::filesystem;

namespace {

fs::path write_lines(const std::string& name, const std::vector<std::string>& lines) {
    const auto path = testing::scratch_dir("vocab") / name;
    std::ofstream f(path);
    for (const auto& l : lines) f << l << "\n";
    return path;
}

std::vector<Concept> browsing_tree() {
    return {
        {"behavioural", "Behavioural", "Information about behaviour.", 1, std::nullopt, {}},
        {"online", "Online behaviour", "Online activity.", 2, "behavioural", {}},
        {"browsing", "browsing behavior", "Information about browsing behavior.", 3, "online", {}},
        {"history", "browser history", "", 4, "browsing", {}},
        {"referral", "browsing referrals", "", 4, "browsing", {}},
        {"national", "National", "", 1, std::nullopt, {}},
        {"citizenship", "citizenship", "Information about citizenship.", 2, "national", {}},
    };
}

}  // namespace

TEST_SUITE("vocab") {

TEST_CASE("single record") {
    const auto p = write_lines("one.jsonl", {R"({"id":"a","name":"A","description":"d"})"});
    const auto v = load_vocabulary(p, TemplateStyle::Description);
    CHECK(v.size() == 1);
    CHECK(v.source_tag() == "one");
    CHECK(compile_prompts(v).front().text == "A: d");
}

TEST_CASE("duplicate id names the second line") {
    const auto p = write_lines("dup.jsonl", {R"({"id":"a","name":"A"})", R"({"id":"a","name":"B"})"});
    CHECK_THROWS_WITH_AS(load_vocabulary(p, TemplateStyle::Description), doctest::Contains("dup.jsonl:2"),
                         ValidationError);
}

TEST_CASE("invariant violations") {
    SUBCASE("dangling parent") {
        const auto p = write_lines("dangling.jsonl", {R"({"id":"a","name":"A","level":3,"parent_id":"zz"})"});
        CHECK_THROWS_WITH_AS(load_vocabulary(p, TemplateStyle::Description), doctest::Contains("dangling"),
                             ValidationError);
    }
    SUBCASE("parent two levels up") {
        const auto p = write_lines("skip.jsonl", {R"({"id":"a","name":"A","level":1})",
                                                  R"({"id":"b","name":"B","level":3,"parent_id":"a"})"});
        CHECK_THROWS_AS(load_vocabulary(p, TemplateStyle::Description), ValidationError);
    }
    SUBCASE("empty name") {
        const auto p = write_lines("noname.jsonl", {R"({"id":"a","name":""})"});
        CHECK_THROWS_AS(load_vocabulary(p, TemplateStyle::Description), ValidationError);
    }
    SUBCASE("not json") {
        const auto p = write_lines("broken.jsonl", {R"({"id":"a","name":"A"})", "{oops"});
        CHECK_THROWS_WITH_AS(load_vocabulary(p, TemplateStyle::Description), doctest::Contains("broken.jsonl:2"),
                             ValidationError);
    }
}

TEST_CASE("file order is kept") {
    const auto p = write_lines("order.jsonl", {R"({"id":"z","name":"Z"})", R"({"id":"a","name":"A"})",
                                               R"({"id":"m","name":"M"})"});
    CHECK(load_vocabulary(p, TemplateStyle::Description).ids() == std::vector<std::string>{"z", "a", "m"});
}

TEST_CASE("131 records") {
    std::vector<std::string> lines;
    for (int i = 0; i < 131; ++i)
        lines.push_back(R"({"id":"pd)" + std::to_string(i) + R"(","name":"concept )" + std::to_string(i) +
                        R"(","description":"something","level":0,"parent_id":null,"examples":[]})");
    const auto v = load_vocabulary(write_lines("pd131.jsonl", lines), TemplateStyle::Description);
    CHECK(v.size() == 131);
    CHECK(compile_prompts(v).size() == 131);
}

TEST_CASE("hierarchy rule") {
    const ConceptVocabulary v(browsing_tree(), TemplateStyle::Description, "tree");
    const auto sel = select_bottleneck(v, SelectionMode::HierarchyRule);
    REQUIRE(sel.ids() == std::vector<std::string>{"browsing", "citizenship"});

    const auto* browsing = sel.find("browsing");
    CHECK(browsing->description == "Information about browsing behavior (e.g., browser history, browsing referrals).");
    CHECK(browsing->examples == std::vector<std::string>{"browser history", "browsing referrals"});
    CHECK(*sel.find("citizenship") == Concept{"citizenship", "citizenship", "Information about citizenship.", 2,
                                              std::nullopt, {}});
    for (const auto& c : sel.concepts()) {
        CHECK(c.level != 4);
        CHECK(c.level != 1);
    }
}

TEST_CASE("level-4 names already in the description are not repeated") {
    auto tree = browsing_tree();
    tree[2].description = "Information about browsing behavior (e.g., browser history).";
    const auto sel = select_bottleneck(ConceptVocabulary(tree, TemplateStyle::Description, "t"),
                                       SelectionMode::HierarchyRule);
    const auto& d = sel.find("browsing")->description;
    CHECK(d.find("browser history") == d.rfind("browser history"));
    CHECK(d.find("browsing referrals") != std::string::npos);

    tree[2].description = "Browser History and Browsing Referrals.";
    const auto sel2 = select_bottleneck(ConceptVocabulary(tree, TemplateStyle::Description, "t"),
                                        SelectionMode::HierarchyRule);
    CHECK(sel2.find("browsing")->description == "Browser History and Browsing Referrals.");
}

TEST_CASE("flat mode is the identity") {
    const ConceptVocabulary v(browsing_tree(), TemplateStyle::Description, "tree");
    const auto flat = select_bottleneck(v, SelectionMode::Flat);
    CHECK(flat.concepts() == v.concepts());
    CHECK(flat.content_hash() == v.content_hash());
}

TEST_CASE("hierarchy rule rejects a flat list") {
    const ConceptVocabulary v({{"a", "A", "", 0, std::nullopt, {}}}, TemplateStyle::Description, "flat");
    CHECK_THROWS_AS(select_bottleneck(v, SelectionMode::HierarchyRule), ValidationError);
}

TEST_CASE("templates") {
    const Concept passport{"passport", "passport", "An identity document.", 3, std::nullopt, {"id card", "visa"}};
    CHECK(compile_prompt(passport, TemplateStyle::Description) == "passport: An identity document.");
    CHECK(compile_prompt(passport, TemplateStyle::InformationAbout) == "passport: information about passport");
    CHECK(compile_prompt(passport, TemplateStyle::DescriptionWithExamples) ==
          "passport: An identity document, e.g. id card, visa");

    const Concept blood{"blood", "blood type", "", 0, std::nullopt, {}};
    CHECK(compile_prompt(blood, TemplateStyle::InformationAbout) == "blood type: information about blood type");
    CHECK(compile_prompt(blood, TemplateStyle::Description) == "blood type: information about blood type");
    CHECK(compile_prompt(Concept{"x", "x", "", 0, std::nullopt, {}}, TemplateStyle::Description) ==
          "x: information about x");
}

TEST_CASE("prompts follow vocabulary order") {
    const ConceptVocabulary v(browsing_tree(), TemplateStyle::InformationAbout, "tree");
    const auto prompts = compile_prompts(v);
    REQUIRE(prompts.size() == v.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(prompts[i].concept_id == v.concepts()[i].id);
}

TEST_CASE("content hash tracks compiled text only") {
    std::vector<Concept> cs{{"a", "A", "first", 0, std::nullopt, {}}, {"b", "B", "second", 0, std::nullopt, {}}};
    const ConceptVocabulary base(cs, TemplateStyle::Description, "x");
    CHECK(base.content_hash() == hash_prompts(compile_prompts(base)));

    // Different source tag and an example that the template ignores: same sentences, same hash.
    cs[0].examples = {"ignored"};
    CHECK(ConceptVocabulary(cs, TemplateStyle::Description, "y").content_hash() == base.content_hash());
    // Example now shows up in the sentence.
    CHECK(ConceptVocabulary(cs, TemplateStyle::DescriptionWithExamples, "x").content_hash() != base.content_hash());
    cs[0].examples.clear();
    cs[1].description = "second!";
    CHECK(ConceptVocabulary(cs, TemplateStyle::Description, "x").content_hash() != base.content_hash());
}

TEST_CASE("prompt file round trip") {
    const auto dir = testing::scratch_dir("vocab-prompts");
    const std::vector<PromptSentence> prompts{{"a", "A: info, \"quoted\""}, {"b", "naïve café"}};
    save_prompts(prompts, dir / "p.jsonl");
    CHECK(load_prompts(dir / "p.jsonl") == prompts);
}

TEST_CASE("style names") {
    CHECK(parse_template_style("description-examples") == TemplateStyle::DescriptionWithExamples);
    CHECK(parse_selection_mode("flat") == SelectionMode::Flat);
    CHECK_THROWS_AS(parse_template_style("poetry"), ValidationError);
}

}
