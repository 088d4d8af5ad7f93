#include <benchmark/benchmark.h>

#include <random>

#include "privlex/explain.hpp"
#include "privlex/lrmodel.hpp"
#include "privlex/score.hpp"

using namespace privlex;

namespace {

EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t dim, const char* prefix, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> n;
    std::vector<std::string> ids;
    std::vector<float> v(rows * dim);
    for (std::size_t i = 0; i < rows; ++i) ids.push_back(prefix + std::to_string(i));
    for (auto& x : v) x = n(rng);
    return {std::move(ids), dim, std::move(v)};
}

// ViT-B/32-sized embeddings against a DPV-sized vocabulary.
void BM_CosineScores(benchmark::State& state) {
    const auto images = random_embeddings(static_cast<std::size_t>(state.range(0)), 512, "i", 1);
    const auto concepts = random_embeddings(131, 512, "c", 2);
    const auto threads = static_cast<unsigned>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(cosine_scores(images, concepts, {}, threads));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CosineScores)->Args({1000, 1})->Args({1000, 4})->Args({10000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

struct Problem {
    ScoreMatrix norm;
    Normalizer normalizer;
    LabeledDataset data;
    ScoreMatrix raw;
};

Problem make_problem(std::size_t rows) {
    const auto raw = cosine_scores(random_embeddings(rows, 64, "i", 3), random_embeddings(131, 64, "c", 4));
    Problem p{{}, fit_normalizer(raw), {}, raw};
    p.norm = apply_normalizer(p.normalizer, raw);
    std::mt19937 rng(5);
    for (std::size_t i = 0; i < rows; ++i) {
        p.data.image_ids.push_back(raw.image_ids()[i]);
        const float s = p.norm.row(i)[0] + p.norm.row(i)[7] - p.norm.row(i)[19];
        p.data.labels.push_back(s + std::normal_distribution<float>(0, 0.3F)(rng) > 0.5F ? 1 : 0);
    }
    return p;
}

void BM_Train(benchmark::State& state) {
    const auto p = make_problem(static_cast<std::size_t>(state.range(0)));
    Hyperparameters h;
    h.C = 0.05;
    h.max_iter = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(train(p.norm, p.data, p.normalizer, h));
}
BENCHMARK(BM_Train)->Args({2000, 100})->Args({2000, 250})->Args({8000, 100})->Unit(benchmark::kMillisecond);

void BM_ExplainAll(benchmark::State& state) {
    const auto p = make_problem(static_cast<std::size_t>(state.range(0)));
    Hyperparameters h;
    h.C = 0.05;
    const auto model = train(p.norm, p.data, p.normalizer, h);
    for (auto _ : state) benchmark::DoNotOptimize(explain_all(model, p.raw, p.norm));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExplainAll)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
