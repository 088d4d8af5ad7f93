#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "privlex/datasets.hpp"
#include "privlex/matrix.hpp"
#include "privlex/score.hpp"
#include "privlex/tune.hpp"
#include "privlex/vocab.hpp"

namespace privlex::testing {

// Embeddings with a shared "CLIP-like" baseline similarity. A few planted concepts carry
// the label: their per-image offset is m * (2y - 1) + noise, tuned so corr(offset, y) ~ rho.
// The remaining concepts are label-independent noise. Concept vectors are exactly
// orthogonal apart from the shared direction, so cosine scores are known in closed form.
struct PlantedSpec {
    std::uint64_t seed = 7;
    std::size_t n_train = 400;
    std::size_t n_val = 200;
    std::size_t n_test = 400;
    std::size_t n_planted = 3;
    std::size_t n_noise = 128;
    double rho = 0.9;
    double private_rate = 0.4;
    // Concepts (from the noise block) that get multi-label presence annotations.
    std::size_t n_annotated = 8;
};

struct PlantedFixture {
    EmbeddingMatrix images;
    EmbeddingMatrix concepts;
    std::vector<PromptSentence> prompts;
    LabeledDataset labels;
    SplitSpec split;
    std::vector<std::string> planted;
    // image id -> annotated concepts present
    std::vector<std::pair<std::string, std::vector<std::string>>> annotations;
};

PlantedFixture make_planted(const PlantedSpec& spec = {});

// Writes images.pvx1, concepts.pvx1, prompts.jsonl, labels.csv, split.json,
// annotations.jsonl and a pipeline.toml running score..zeroshot into `dir`.
void write_planted(const PlantedFixture& fx, const std::filesystem::path& dir, std::uint64_t seed, int budget = 25);

// Raw score matrix with values uniform in [lo, hi].
ScoreMatrix random_scores(std::size_t rows, std::size_t cols, std::uint64_t seed, float lo = -0.1F, float hi = 0.4F);

std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& p);

}  // namespace privlex::testing
