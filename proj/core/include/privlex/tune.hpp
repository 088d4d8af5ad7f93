#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "privlex/datasets.hpp"
#include "privlex/lrmodel.hpp"
#include "privlex/score.hpp"

namespace privlex::tune {

inline constexpr double kMinC = 1e-10;
inline constexpr double kMaxC = 1.0;
inline constexpr int kMinIter = 1;
inline constexpr int kMaxIter = 250;

enum class Strategy { Random, Tpe };

struct TrialRecord {
    int trial_index = 0;
    double C = 1.0;
    int max_iter = 1;
    double val_f1_macro = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const TrialRecord&) const = default;
};

struct SearchResult {
    std::vector<TrialRecord> trials;
    TrialRecord best;
    int budget = 0;
    Strategy strategy = Strategy::Random;
    std::uint64_t seed = 0;

    bool operator==(const SearchResult&) const = default;
};

struct SearchOptions {
    int budget = 100;
    Strategy strategy = Strategy::Random;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // Random strategy only; results do not depend on it
};

/// splitmix64 finaliser; per-trial seeds are mix(seed, trial_index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Small deterministic generator so sampled trials are identical across standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept;
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) noexcept;
    double normal() noexcept;

private:
    std::uint64_t state_;
};

/// Log-uniform C over [1e-10, 1] and uniform max_iter over [1, 250].
TrialRecord sample_random_trial(int trial_index, std::uint64_t search_seed);

/// `best` has the highest validation F1-macro; ties go to smaller C, then smaller max_iter,
/// then the earlier trial.
bool better_trial(const TrialRecord& a, const TrialRecord& b) noexcept;

/// Every trial trains on the train split and scores F1-macro on the validation split.
/// Scores must be normalized with `normalizer`.
SearchResult search(const ScoreMatrix& train_scores, const LabeledDataset& train_labels, const ScoreMatrix& val_scores,
                    const LabeledDataset& val_labels, const Normalizer& normalizer, const SearchOptions& options);

Strategy parse_strategy(std::string_view name);
std::string_view to_string(Strategy strategy) noexcept;

void save_search(const SearchResult& result, const std::filesystem::path& path);
SearchResult load_search(const std::filesystem::path& path);

}  // namespace privlex::tune
