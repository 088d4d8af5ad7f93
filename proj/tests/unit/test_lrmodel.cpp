#include <doctest.h>

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "privlex/error.hpp"
#include "privlex/lrmodel.hpp"
#include "privlex/tune.hpp"
#include "synthetic.hpp"

using namespace privlex;

namespace {

struct Problem {
    std::vector<double> x;
    std::vector<float> xf;
    std::vector<std::uint8_t> y;
    std::size_t rows, cols;
};

// Features uniform in [0,1]; labels drawn from a sparse logistic model.
Problem make_problem(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    tune::SplitMix64 rng(seed);
    Problem p{{}, {}, {}, rows, cols};
    std::vector<double> truth(cols, 0.0);
    for (std::size_t j = 0; j < cols; j += 3) truth[j] = (j % 2 ? -3.0 : 4.0);
    for (std::size_t i = 0; i < rows; ++i) {
        double z = -1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const float v = static_cast<float>(rng.uniform());
            p.xf.push_back(v);
            p.x.push_back(v);
            z += truth[j] * v;
        }
        p.y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0);
    }
    return p;
}

struct Fixture {
    ScoreMatrix scores;
    LabeledDataset data;
    Normalizer norm;
};

Fixture as_dataset(const Problem& p) {
    std::vector<std::string> ids, cids;
    for (std::size_t i = 0; i < p.rows; ++i) ids.push_back("i" + std::to_string(i));
    for (std::size_t j = 0; j < p.cols; ++j) cids.push_back("c" + std::to_string(j));
    Normalizer n{cids, std::vector<float>(p.cols, 0.0F), std::vector<float>(p.cols, 1.0F), NormalizerMode::PerConcept};
    return {ScoreMatrix(ids, cids, p.xf, true, "vh"), LabeledDataset{ids, p.y, SplitTag::Train}, n};
}

}  // namespace

TEST_SUITE("lrmodel") {

TEST_CASE("gradient matches central differences") {
    const auto p = make_problem(60, 6, 21);
    const LogisticProblem lp(p.xf, p.rows, p.cols, p.y, 0.5);
    tune::SplitMix64 rng(4);
    for (int point = 0; point < 20; ++point) {
        std::vector<double> w(p.cols);
        for (auto& v : w) v = rng.normal();
        const double b = rng.normal();
        std::vector<double> g(p.cols);
        const auto [loss, gb] = lp.smooth_gradient(w, b, g);
        CHECK(loss == doctest::Approx(lp.smooth_loss(w, b)));
        const double h = 1e-5;
        for (std::size_t j = 0; j <= p.cols; ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < p.cols) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd = (lp.smooth_loss(wp, bp) - lp.smooth_loss(wm, bm)) / (2 * h);
            const double an = j < p.cols ? g[j] : gb;
            CHECK(std::fabs(fd - an) / std::max(std::fabs(an), 1e-8) < 1e-5);
        }
    }
}

TEST_CASE("objective agrees with an independent evaluation") {
    const auto p = make_problem(50, 5, 2);
    const LogisticProblem lp(p.xf, p.rows, p.cols, p.y, 0.3);
    const std::vector<double> w{0.5, -1.0, 0.0, 2.0, 0.25};
    CHECK(lp.objective(w, 0.1) == doctest::Approx(testing::oracle_objective(p.x, p.rows, p.cols, p.y, 0.3, w, 0.1))
                                      .epsilon(1e-12));
}

TEST_CASE("matches the slow proximal-gradient oracle") {
    const auto p = make_problem(200, 10, 7);
    for (double C : {0.05, 0.5, 1.0}) {
        CAPTURE(C);
        const LogisticProblem lp(p.xf, p.rows, p.cols, p.y, C);
        const auto fit = fit_proximal_gradient(lp, 20000);
        const auto ref = testing::oracle_lasso_logistic(p.x, p.rows, p.cols, p.y, C);
        const std::vector<double> rw(ref.begin(), ref.end() - 1);
        const double oracle = testing::oracle_objective(p.x, p.rows, p.cols, p.y, C, rw, ref.back());
        CHECK(std::fabs(fit.objective - oracle) < 1e-6);
    }
}

TEST_CASE("objective never increases") {
    const auto p = make_problem(120, 8, 3);
    const auto fit = fit_proximal_gradient(LogisticProblem(p.xf, p.rows, p.cols, p.y, 0.2), 250);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-12);
}

TEST_CASE("tiny C zeroes every weight") {
    auto f = as_dataset(make_problem(100, 10, 5));
    const auto m = train(f.scores, f.data, f.norm, {1e-10, 250, 7});
    for (double w : m.weights) CHECK(w == 0.0);
    CHECK(m.meta.nonzero_count == 0);
    double base = 0;
    for (auto y : f.data.labels) base += y;
    base /= static_cast<double>(f.data.size());
    // Bias alone fits the base rate, so every row gets the same probability.
    const auto pr = predict_proba(m, f.scores);
    for (double v : pr) CHECK(v == pr.front());
    CHECK(pr.front() == doctest::Approx(1.0 / (1.0 + std::exp(-m.bias))));
    CHECK(pr.front() == doctest::Approx(base).epsilon(0.05));
}

TEST_CASE("separable one-dimensional data") {
    // With N = 4 and C = 1 the penalty would exactly cancel the gradient at zero; N = 8 halves it.
    const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f", "g", "h"};
    const ScoreMatrix s(ids, {"x"}, {0, 0, 0, 0, 1, 1, 1, 1}, true);
    const LabeledDataset d{ids, {0, 0, 0, 0, 1, 1, 1, 1}, SplitTag::Train};
    const Normalizer n{{"x"}, {0.0F}, {1.0F}, NormalizerMode::PerConcept};
    const auto m = train(s, d, n, {1.0, 100, 0});
    CHECK(m.weights[0] > 0.0);
    CHECK(predict_labels(predict_proba(m, s)) == d.labels);
}

TEST_CASE("nonzero count grows with C") {
    auto f = as_dataset(make_problem(200, 10, 17));
    std::size_t prev = 0;
    for (double C : {1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0}) {
        const auto m = train(f.scores, f.data, f.norm, {C, 250, 1});
        CAPTURE(C);
        CHECK(prev <= m.meta.nonzero_count + 2);
        prev = m.meta.nonzero_count;
    }
}

TEST_CASE("prediction basics") {
    SparseLinearModel m;
    m.concept_ids = {"a", "b"};
    m.weights = {0.0, 0.0};
    const ScoreMatrix s({"r1", "r2"}, {"a", "b"}, {1, 0, 0.3F, 0.7F}, true);
    for (double v : predict_proba(m, s)) CHECK(v == 0.5);
    m.weights = {1.0, 0.0};
    CHECK(predict_proba(m, s)[0] == doctest::Approx(0.7310585786));
    CHECK(predict_labels({0.5, 0.49}) == std::vector<std::uint8_t>{1, 0});

    const ScoreMatrix swapped({"r2", "r1"}, {"a", "b"}, {0.3F, 0.7F, 1, 0}, true);
    const auto p1 = predict_proba(m, s), p2 = predict_proba(m, swapped);
    CHECK(p1[0] == p2[1]);
    CHECK(p1[1] == p2[0]);

    const ScoreMatrix other({"r1"}, {"b", "a"}, {1, 0}, true);
    CHECK_THROWS_AS(predict_proba(m, other), ValidationError);
}

TEST_CASE("weight signs") {
    SparseLinearModel m;
    m.concept_ids = {"p", "z", "n"};
    m.weights = {0.3, 0.0, -0.3};
    const auto s = weight_signs(m);
    CHECK(s.at("p") == WeightSign::Private);
    CHECK(s.at("z") == WeightSign::Zero);
    CHECK(s.at("n") == WeightSign::Public);
}

TEST_CASE("training is deterministic") {
    auto f = as_dataset(make_problem(150, 10, 8));
    CHECK(train(f.scores, f.data, f.norm, {0.3, 120, 7}) == train(f.scores, f.data, f.norm, {0.3, 120, 7}));
}

TEST_CASE("input checks") {
    auto f = as_dataset(make_problem(20, 3, 1));
    const ScoreMatrix raw(f.scores.image_ids(), f.scores.concept_ids(), f.scores.values(), false);
    CHECK_THROWS_AS(train(raw, f.data, f.norm, {0.5, 10, 0}), ValidationError);
    auto shuffled = f.data;
    std::swap(shuffled.image_ids[0], shuffled.image_ids[1]);
    CHECK_THROWS_AS(train(f.scores, shuffled, f.norm, {0.5, 10, 0}), ValidationError);
    CHECK_THROWS_AS(train(f.scores, f.data, f.norm, {0.0, 10, 0}), ValidationError);
    CHECK_THROWS_AS(train(f.scores, f.data, f.norm, {0.5, 0, 0}), ValidationError);
}

TEST_CASE("save and load") {
    const auto dir = testing::scratch_dir("lrmodel-io");
    auto f = as_dataset(make_problem(120, 6, 9));
    const auto m = train(f.scores, f.data, f.norm, {0.37, 80, 7}, "fixture");
    save_model(m, dir / "m.json");
    const auto back = load_model(dir / "m.json", "vh");
    CHECK(back == m);
    CHECK(predict_proba(back, f.scores) == predict_proba(m, f.scores));
    CHECK(recompute_objective(back, f.scores, f.data) == back.meta.objective_value);
    CHECK_THROWS_WITH_AS(load_model(dir / "m.json", "other-vocab"), doctest::Contains("vocab"), ValidationError);

    auto text = testing::read_file(dir / "m.json");
    text.replace(text.find("\"format_version\": 1"), 19, "\"format_version\": 9");
    std::ofstream(dir / "v9.json") << text;
    CHECK_THROWS_AS(load_model(dir / "v9.json"), ValidationError);
}

}
