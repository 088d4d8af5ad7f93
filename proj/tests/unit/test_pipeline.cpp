#include <doctest.h>

#include <fstream>

#include "privlex/error.hpp"
#include "privlex/pipeline.hpp"
#include "synthetic.hpp"

using namespace privlex;
namespace fs = std::filesystem;

namespace {

testing::PlantedSpec small_spec() {
    testing::PlantedSpec s;
    s.n_train = 120;
    s.n_val = 60;
    s.n_test = 80;
    s.n_noise = 20;
    return s;
}

fs::path setup(const std::string& name, int budget = 6) {
    const auto dir = testing::scratch_dir(name);
    testing::write_planted(testing::make_planted(small_spec()), dir, 3, budget);
    return dir;
}

void append(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::app) << text; }

void replace_in(const fs::path& p, const std::string& from, const std::string& to) {
    auto s = testing::read_file(p);
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    s.replace(at, from.size(), to);
    std::ofstream(p, std::ios::binary | std::ios::trunc) << s;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config defaults and stage selection") {
    const auto dir = setup("pipe-config");
    const auto cfg = pipeline::load_config(dir / "pipeline.toml");
    CHECK(cfg.stages == std::vector<std::string>{"score", "tune", "train", "evaluate", "explain", "zeroshot"});
    CHECK(cfg.dataset_tag == "synthetic");
    CHECK(cfg.out_dir == dir / "out");
    CHECK(cfg.seed == 3);

    pipeline::RunOptions opt;
    opt.seed = 99;
    CHECK(pipeline::load_config(dir / "pipeline.toml", opt).seed == 99);
}

TEST_CASE("config errors") {
    const auto dir = setup("pipe-config-errors");
    SUBCASE("unknown key") {
        replace_in(dir / "pipeline.toml", "[tune]\n", "[tune]\nbudgte = 3\n");
        CHECK_THROWS_WITH_AS(pipeline::load_config(dir / "pipeline.toml"), doctest::Contains("budgte"), ValidationError);
    }
    SUBCASE("unknown section") {
        append(dir / "pipeline.toml", "\n[extra]\nx = 1\n");
        CHECK_THROWS_AS(pipeline::load_config(dir / "pipeline.toml"), ValidationError);
    }
    SUBCASE("missing input file") {
        fs::remove(dir / "labels.csv");
        CHECK_THROWS_AS(pipeline::load_config(dir / "pipeline.toml"), ValidationError);
    }
    SUBCASE("half of the train hyperparameters") {
        replace_in(dir / "pipeline.toml", "[train]\n", "[train]\nC = 0.5\n");
        CHECK_THROWS_AS(pipeline::load_config(dir / "pipeline.toml"), ValidationError);
    }
    SUBCASE("stage prerequisites") {
        replace_in(dir / "pipeline.toml", "threads = 1\n", "threads = 1\nstages = [\"vocab\"]\n");
        CHECK_THROWS_WITH_AS(pipeline::load_config(dir / "pipeline.toml"), doctest::Contains("vocab"), ValidationError);
    }
}

TEST_CASE("score-only run, cache reuse and tampering") {
    const auto dir = setup("pipe-score");
    replace_in(dir / "pipeline.toml", "threads = 1\n", "threads = 1\nstages = [\"score\"]\n");

    const auto first = pipeline::run_pipeline(dir / "pipeline.toml");
    REQUIRE(first.stages.size() == 1);
    CHECK(first.stages[0].name == "score");
    CHECK(first.stages[0].status == pipeline::StageStatus::Ran);
    CHECK(fs::exists(dir / "out" / "scores_norm.pvx1"));
    CHECK(fs::exists(dir / "out" / "run_manifest.json"));
    const auto raw_bytes = testing::read_file(dir / "out" / "scores_raw.pvx1");

    fs::remove_all(dir / "out");
    const auto second = pipeline::run_pipeline(dir / "pipeline.toml");
    REQUIRE(second.stages.size() == 1);
    CHECK(second.stages[0].status == pipeline::StageStatus::Cached);
    CHECK(second.stages[0].cache_key == first.stages[0].cache_key);
    CHECK(testing::read_file(dir / "out" / "scores_raw.pvx1") == raw_bytes);
    CHECK(testing::read_file(dir / "out" / "run_manifest.json").find("\"cached\"") != std::string::npos);

    // A changed input invalidates the key.
    auto fx = testing::make_planted(small_spec());
    save_matrix(EmbeddingMatrix(fx.images.ids(), fx.images.dim(), [&] {
                    auto d = fx.images.data();
                    d[0] += 0.01F;
                    return d;
                }()),
                dir / "images.pvx1");
    const auto third = pipeline::run_pipeline(dir / "pipeline.toml");
    CHECK(third.stages[0].status == pipeline::StageStatus::Ran);
    CHECK(third.stages[0].cache_key != first.stages[0].cache_key);

    // Corrupt the artifact of the current entry.
    const auto entry = dir / ".privlex-cache" / "score" / third.stages[0].cache_key;
    REQUIRE(fs::exists(entry / "normalizer.json"));
    append(entry / "normalizer.json", " ");
    CHECK_THROWS_WITH_AS(pipeline::run_pipeline(dir / "pipeline.toml"), doctest::Contains("hash mismatch"),
                         RuntimeError);
}

TEST_CASE("disabled cache always runs") {
    const auto dir = setup("pipe-nocache");
    replace_in(dir / "pipeline.toml", "threads = 1\n", "threads = 1\nstages = [\"score\"]\ncache = false\n");
    pipeline::run_pipeline(dir / "pipeline.toml");
    CHECK(pipeline::run_pipeline(dir / "pipeline.toml").stages[0].status == pipeline::StageStatus::Ran);
    CHECK_FALSE(fs::exists(dir / ".privlex-cache"));
}

TEST_CASE("stage errors carry the stage name") {
    const auto dir = setup("pipe-stage-error");
    // Concept embeddings whose ids disagree with the prompt list.
    auto fx = testing::make_planted(small_spec());
    auto ids = fx.concepts.ids();
    std::swap(ids[0], ids[1]);
    save_matrix(EmbeddingMatrix(ids, fx.concepts.dim(), fx.concepts.data()), dir / "concepts.pvx1");
    CHECK_THROWS_WITH_AS(pipeline::run_pipeline(dir / "pipeline.toml"), doctest::Contains("stage 'score'"),
                         ValidationError);
}

TEST_CASE("full run matches module-level results") {
    const auto dir = setup("pipe-full");
    const auto man = pipeline::run_pipeline(dir / "pipeline.toml");
    CHECK(man.stages.size() == 6);
    for (const auto* f : {"search.json", "model.json", "report.json", "explanations.json", "explanations.txt",
                          "zeroshot_thresholds.json", "zeroshot_eval.json"})
        CHECK(fs::exists(dir / "out" / f));

    // Recompute the evaluation report directly from the modules.
    const auto fx = testing::make_planted(small_spec());
    const auto raw = cosine_scores(fx.images, fx.concepts, hash_prompts(fx.prompts));
    const auto norm = fit_normalizer(raw.select_rows(fx.split.train));
    const auto scores = apply_normalizer(norm, raw);
    const auto tr = scores.select_rows(fx.split.train), va = scores.select_rows(fx.split.val),
               te = scores.select_rows(fx.split.test);
    const auto ltr = fx.labels.select(fx.split.train, SplitTag::Train),
               lva = fx.labels.select(fx.split.val, SplitTag::Val),
               lte = fx.labels.select(fx.split.test, SplitTag::Test);
    const auto res = tune::search(tr, ltr, va, lva, norm, {6, tune::Strategy::Random, 3, 1});
    const auto model = train(tr, ltr, norm, {res.best.C, res.best.max_iter, res.best.seed}, "synthetic");
    const auto counts = metrics::confusion(predict_labels(predict_proba(model, te)), lte.labels);
    CHECK(testing::read_file(dir / "out" / "report.json") == render_evaluation_report(counts, "synthetic", "test"));
    CHECK(load_model(dir / "out" / "model.json") == model);
}

TEST_CASE("two runs give identical JSON") {
    const auto a = setup("pipe-det-a");
    const auto b = setup("pipe-det-b");
    pipeline::run_pipeline(a / "pipeline.toml");
    pipeline::run_pipeline(b / "pipeline.toml");
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a / "out")) {
        const auto name = e.path().filename().string();
        if (e.path().extension() != ".json" || name == "run_manifest.json") continue;
        CAPTURE(name);
        CHECK(testing::read_file(e.path()) == testing::read_file(b / "out" / name));
        ++compared;
    }
    CHECK(compared >= 8);
}

TEST_CASE("fixed hyperparameters skip the search") {
    const auto dir = setup("pipe-fixed");
    replace_in(dir / "pipeline.toml", "[train]\n", "[train]\nC = 0.5\nmax_iter = 40\n");
    replace_in(dir / "pipeline.toml", "threads = 1\n", "threads = 1\nstages = [\"score\", \"train\", \"evaluate\"]\n");
    const auto man = pipeline::run_pipeline(dir / "pipeline.toml");
    CHECK(man.stages.size() == 3);
    const auto m = load_model(dir / "out" / "model.json");
    CHECK(m.hyper.C == 0.5);
    CHECK(m.hyper.max_iter == 40);
    CHECK(m.hyper.seed == 3);
}

TEST_CASE("bias stage compares against other models") {
    const auto dir = setup("pipe-bias");
    replace_in(dir / "pipeline.toml", "[train]\n", "[train]\nC = 0.5\nmax_iter = 40\n");
    replace_in(dir / "pipeline.toml", "threads = 1\n", "threads = 1\nstages = [\"score\", \"train\"]\n");
    pipeline::run_pipeline(dir / "pipeline.toml");
    fs::copy_file(dir / "out" / "model.json", dir / "other.json");
    replace_in(dir / "pipeline.toml", "stages = [\"score\", \"train\"]", "stages = [\"score\", \"train\", \"bias\"]");
    append(dir / "pipeline.toml", "\n[bias]\nmodels = [\"other.json\"]\n");
    pipeline::run_pipeline(dir / "pipeline.toml");
    const auto csv = testing::read_file(dir / "out" / "bias.csv");
    CHECK(csv.rfind("concept_id,synthetic,synthetic#2,agreement\n", 0) == 0);
    CHECK(fs::exists(dir / "out" / "bias.svg"));
}

TEST_CASE("evaluation report layout") {
    const auto text = render_evaluation_report({3, 2, 4, 1}, "demo", "test");
    CHECK(text.find("\"ba\": 0.7083333333333333") != std::string::npos);
    CHECK(text.find("\"dataset_tag\": \"demo\"") != std::string::npos);
    CHECK(text.find("\"private\"") != std::string::npos);
    CHECK(text.find("\"public\"") != std::string::npos);
}

}
