#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "privlex/error.hpp"
#include "privlex/score.hpp"
#include "synthetic.hpp"

using namespace privlex;

namespace {

float cos1(std::vector<float> a, std::vector<float> b) {
    const std::size_t dim = a.size();
    const EmbeddingMatrix i({"i"}, dim, std::move(a));
    const EmbeddingMatrix t({"t"}, dim, std::move(b));
    return cosine_scores(i, t).at(0, 0);
}

ScoreMatrix column(std::vector<float> v) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < v.size(); ++i) ids.push_back("i" + std::to_string(i));
    return {std::move(ids), {"c"}, std::move(v), false};
}

}  // namespace

TEST_SUITE("score") {

TEST_CASE("cosine examples") {
    CHECK(cos1({1, 0}, {1, 0}) == 1.0F);
    CHECK(cos1({1, 0}, {0, 1}) == 0.0F);
    CHECK(cos1({3, 4}, {4, 3}) == doctest::Approx(0.96).epsilon(1e-7));
}

TEST_CASE("cosine properties") {
    tune::SplitMix64 rng(3);
    std::vector<float> x(24 * 8), y(10 * 8);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (auto& v : y) v = static_cast<float>(rng.normal());
    std::vector<std::string> xi, yi;
    for (int i = 0; i < 24; ++i) xi.push_back("x" + std::to_string(i));
    for (int i = 0; i < 10; ++i) yi.push_back("y" + std::to_string(i));
    const EmbeddingMatrix X(xi, 8, x), Y(yi, 8, y);
    const auto s = cosine_scores(X, Y);

    SUBCASE("range") {
        for (float v : s.values()) {
            CHECK(v >= -1.0F - 1e-6F);
            CHECK(v <= 1.0F + 1e-6F);
        }
    }
    SUBCASE("symmetry") {
        const auto t = cosine_scores(Y, X);
        for (std::size_t i = 0; i < 24; ++i)
            for (std::size_t j = 0; j < 10; ++j) CHECK(s.at(i, j) == doctest::Approx(t.at(j, i)).epsilon(1e-6));
    }
    SUBCASE("scale invariance") {
        auto scaled = x;
        for (std::size_t k = 0; k < 8; ++k) scaled[5 * 8 + k] *= 37.5F;
        const auto t = cosine_scores(EmbeddingMatrix(xi, 8, scaled), Y);
        for (std::size_t j = 0; j < 10; ++j) CHECK(std::fabs(t.at(5, j) - s.at(5, j)) < 1e-6F);
    }
    SUBCASE("threads do not change values") {
        CHECK(cosine_scores(X, Y, {}, 4) == s);
    }
}

TEST_CASE("cosine errors") {
    CHECK_THROWS_WITH_AS(cosine_scores(EmbeddingMatrix({"img"}, 2, {0, 0}), EmbeddingMatrix({"t"}, 2, {1, 0})),
                         doctest::Contains("img"), ValidationError);
    CHECK_THROWS_AS(cosine_scores(EmbeddingMatrix({"i"}, 2, {1, 0}), EmbeddingMatrix({"t"}, 3, {1, 0, 0})),
                    ValidationError);
}

TEST_CASE("fit normalizer") {
    auto n = fit_normalizer(column({0.1F, 0.2F, 0.3F}));
    CHECK(n.min[0] == 0.1F);
    CHECK(n.max[0] == 0.3F);
    n = fit_normalizer(column({0.5F, 0.5F}));
    CHECK(n.min[0] == 0.5F);
    CHECK(n.max[0] == 0.5F);
    CHECK_THROWS_AS(fit_normalizer(ScoreMatrix({}, {"c"}, {}, false)), ValidationError);
}

TEST_CASE("apply normalizer") {
    const auto n = fit_normalizer(column({0.1F, 0.3F}));
    const auto out = apply_normalizer(n, column({0.2F, 0.0F, 0.9F}));
    CHECK(out.normalized());
    CHECK(out.at(0, 0) == doctest::Approx(0.5));
    CHECK(out.at(1, 0) == 0.0F);
    CHECK(out.at(2, 0) == 1.0F);

    const auto flat = apply_normalizer(fit_normalizer(column({0.5F, 0.5F})), column({0.1F, 0.5F, 0.8F}));
    for (float v : flat.values()) CHECK(v == 0.5F);

    Normalizer other = n;
    other.concept_ids = {"d"};
    CHECK_THROWS_AS(apply_normalizer(other, column({0.2F})), ValidationError);
}

TEST_CASE("self-normalized columns span [0, 1]") {
    const auto raw = testing::random_scores(10, 131, 42);
    const auto norm = apply_normalizer(fit_normalizer(raw), raw);
    for (std::size_t j = 0; j < norm.cols(); ++j) {
        float lo = 1, hi = 0;
        for (std::size_t i = 0; i < norm.rows(); ++i) {
            lo = std::min(lo, norm.at(i, j));
            hi = std::max(hi, norm.at(i, j));
        }
        CHECK(lo == 0.0F);
        CHECK(hi == 1.0F);
    }
}

TEST_CASE("normalizer is monotone per column") {
    const auto train = testing::random_scores(20, 4, 8);
    const auto n = fit_normalizer(train);
    std::vector<float> grid;
    for (int k = 0; k <= 40; ++k) grid.push_back(-0.5F + 0.025F * static_cast<float>(k));
    std::vector<std::string> ids;
    std::vector<float> vals;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ids.push_back("g" + std::to_string(k));
        for (int j = 0; j < 4; ++j) vals.push_back(grid[k]);
    }
    const auto out = apply_normalizer(n, ScoreMatrix(ids, train.concept_ids(), vals, false));
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 1; k < grid.size(); ++k) CHECK(out.at(k, j) >= out.at(k - 1, j));
}

TEST_CASE("global mode shares bounds") {
    const ScoreMatrix raw({"a", "b"}, {"x", "y"}, {0.0F, 0.4F, 0.2F, 0.8F}, false);
    const auto n = fit_normalizer(raw, NormalizerMode::Global);
    CHECK(n.min == std::vector<float>{0.0F, 0.0F});
    CHECK(n.max == std::vector<float>{0.8F, 0.8F});
    CHECK(apply_normalizer(n, raw).at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("files round trip") {
    const auto dir = testing::scratch_dir("score-files");
    const auto raw = testing::random_scores(7, 5, 1);
    const ScoreMatrix tagged(raw.image_ids(), raw.concept_ids(), raw.values(), false, "abc123");
    save_scores(tagged, dir / "s.pvx1");
    CHECK(load_scores(dir / "s.pvx1") == tagged);

    const auto n = fit_normalizer(raw);
    save_normalizer(n, dir / "n.json");
    CHECK(load_normalizer(dir / "n.json") == n);

    const auto norm = apply_normalizer(n, raw);
    save_scores(norm, dir / "norm.pvx1");
    CHECK(load_scores(dir / "norm.pvx1").normalized());
}

}
