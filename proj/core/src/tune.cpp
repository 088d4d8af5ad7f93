#include "privlex/tune.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numbers>
#include <thread>

#include "jsonio.hpp"
#include "privlex/error.hpp"
#include "privlex/metrics.hpp"

namespace privlex::tune {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

int SplitMix64::uniform_int(int lo, int hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
}

double SplitMix64::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

const double kLogMinC = std::log10(kMinC);
const double kLogMaxC = std::log10(kMaxC);

double c_from_log(double u) { return std::clamp(std::pow(10.0, u), kMinC, kMaxC); }

double evaluate_trial(const ScoreMatrix& train_scores, const LabeledDataset& train_labels, const ScoreMatrix& val_scores,
                      const LabeledDataset& val_labels, const Normalizer& normalizer, const TrialRecord& t) {
    const auto model = train(train_scores, train_labels, normalizer, {t.C, t.max_iter, t.seed});
    const auto pred = predict_labels(predict_proba(model, val_scores));
    return metrics::evaluate(pred, val_labels.labels).f1_macro;
}

// One-dimensional Parzen estimator on a bounded interval: a Gaussian per observation
// plus a wide prior component, each truncated to [lo, hi].
class Parzen {
public:
    Parzen(std::vector<double> points, double lo, double hi) : lo_(lo), hi_(hi) {
        std::sort(points.begin(), points.end());
        const double range = hi - lo;
        const double min_sigma = range / std::min(100.0, 1.0 + static_cast<double>(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double left = i > 0 ? points[i] - points[i - 1] : points[i] - lo;
            const double right = i + 1 < points.size() ? points[i + 1] - points[i] : hi - points[i];
            mu_.push_back(points[i]);
            sigma_.push_back(std::clamp(std::max(left, right), min_sigma, range));
        }
        mu_.push_back(0.5 * (lo + hi));
        sigma_.push_back(range);
    }

    double sample(SplitMix64& rng) const {
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(mu_.size()) - 1));
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double x = mu_[k] + sigma_[k] * rng.normal();
            if (x >= lo_ && x <= hi_) return x;
        }
        return std::clamp(mu_[k], lo_, hi_);
    }

    double log_density(double x) const {
        double total = 0.0;
        for (std::size_t k = 0; k < mu_.size(); ++k) {
            const double z = (x - mu_[k]) / sigma_[k];
            const double mass = cdf((hi_ - mu_[k]) / sigma_[k]) - cdf((lo_ - mu_[k]) / sigma_[k]);
            total += std::exp(-0.5 * z * z) / (sigma_[k] * std::sqrt(2.0 * std::numbers::pi) * std::max(mass, 1e-300));
        }
        return std::log(total / static_cast<double>(mu_.size()) + 1e-300);
    }

private:
    static double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

    double lo_, hi_;
    std::vector<double> mu_, sigma_;
};

TrialRecord sample_tpe_trial(int trial_index, std::uint64_t search_seed, const std::vector<TrialRecord>& history) {
    std::vector<const TrialRecord*> order;
    for (const auto& t : history) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(),
                     [](const TrialRecord* a, const TrialRecord* b) { return a->val_f1_macro > b->val_f1_macro; });
    const auto n_good = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.25 * order.size())));
    std::vector<double> good_c, good_i, bad_c, bad_i;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& c = k < n_good ? good_c : bad_c;
        auto& i = k < n_good ? good_i : bad_i;
        c.push_back(std::log10(order[k]->C));
        i.push_back(order[k]->max_iter);
    }
    const Parzen lc(good_c, kLogMinC, kLogMaxC), gc(bad_c, kLogMinC, kLogMaxC);
    const Parzen li(good_i, kMinIter - 0.5, kMaxIter + 0.5), gi(bad_i, kMinIter - 0.5, kMaxIter + 0.5);

    TrialRecord rec;
    rec.trial_index = trial_index;
    rec.seed = mix_seed(search_seed, static_cast<std::uint64_t>(trial_index));
    SplitMix64 rng(rec.seed);
    double best_score = -INFINITY;
    for (int cand = 0; cand < 24; ++cand) {
        const double u = lc.sample(rng);
        const double m = li.sample(rng);
        const double score = lc.log_density(u) - gc.log_density(u) + li.log_density(m) - gi.log_density(m);
        if (score > best_score) {
            best_score = score;
            rec.C = c_from_log(u);
            rec.max_iter = std::clamp(static_cast<int>(std::lround(m)), kMinIter, kMaxIter);
        }
    }
    return rec;
}

}  // namespace

TrialRecord sample_random_trial(int trial_index, std::uint64_t search_seed) {
    TrialRecord rec;
    rec.trial_index = trial_index;
    rec.seed = mix_seed(search_seed, static_cast<std::uint64_t>(trial_index));
    SplitMix64 rng(rec.seed);
    rec.C = c_from_log(kLogMinC + (kLogMaxC - kLogMinC) * rng.uniform());
    rec.max_iter = rng.uniform_int(kMinIter, kMaxIter);
    return rec;
}

bool better_trial(const TrialRecord& a, const TrialRecord& b) noexcept {
    if (a.val_f1_macro != b.val_f1_macro) return a.val_f1_macro > b.val_f1_macro;
    if (a.C != b.C) return a.C < b.C;
    if (a.max_iter != b.max_iter) return a.max_iter < b.max_iter;
    return a.trial_index < b.trial_index;
}

SearchResult search(const ScoreMatrix& train_scores, const LabeledDataset& train_labels, const ScoreMatrix& val_scores,
                    const LabeledDataset& val_labels, const Normalizer& normalizer, const SearchOptions& options) {
    if (options.budget < 1) throw ValidationError("tune: budget must be >= 1");
    if (val_scores.rows() == 0 || val_labels.size() == 0) throw ValidationError("tune: validation split is empty");
    if (val_scores.image_ids() != val_labels.image_ids)
        throw ValidationError("tune: validation scores and labels are not aligned");

    SearchResult result;
    result.budget = options.budget;
    result.strategy = options.strategy;
    result.seed = options.seed;
    result.trials.resize(static_cast<std::size_t>(options.budget));
    auto run = [&](TrialRecord t) {
        t.val_f1_macro = evaluate_trial(train_scores, train_labels, val_scores, val_labels, normalizer, t);
        return t;
    };

    if (options.strategy == Strategy::Random) {
        const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(options.budget)));
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (int k = next++; k < options.budget; k = next++) {
                try {
                    result.trials[static_cast<std::size_t>(k)] = run(sample_random_trial(k, options.seed));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        if (threads == 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        const int startup = std::min(10, options.budget);
        for (int k = 0; k < options.budget; ++k) {
            const std::vector<TrialRecord> history(result.trials.begin(), result.trials.begin() + k);
            auto trial = k < startup ? sample_random_trial(k, options.seed) : sample_tpe_trial(k, options.seed, history);
            result.trials[static_cast<std::size_t>(k)] = run(trial);
        }
    }

    result.best = result.trials.front();
    for (const auto& t : result.trials)
        if (better_trial(t, result.best)) result.best = t;
    return result;
}

Strategy parse_strategy(std::string_view name) {
    if (name == "random") return Strategy::Random;
    if (name == "tpe") return Strategy::Tpe;
    throw ValidationError("unknown search strategy '" + std::string(name) + "' (expected random or tpe)");
}

std::string_view to_string(Strategy strategy) noexcept { return strategy == Strategy::Tpe ? "tpe" : "random"; }

namespace {
jsonio::json trial_json(const TrialRecord& t) {
    return {{"trial_index", t.trial_index}, {"C", t.C}, {"max_iter", t.max_iter},
            {"val_f1_macro", t.val_f1_macro}, {"seed", t.seed}};
}
TrialRecord trial_from(const jsonio::json& j) {
    return {j.at("trial_index").get<int>(), j.at("C").get<double>(), j.at("max_iter").get<int>(),
            j.at("val_f1_macro").get<double>(), j.at("seed").get<std::uint64_t>()};
}
}  // namespace

void save_search(const SearchResult& result, const std::filesystem::path& path) {
    jsonio::json trials = jsonio::json::array();
    for (const auto& t : result.trials) trials.push_back(trial_json(t));
    jsonio::json doc = {{"budget", result.budget},
                        {"strategy", std::string(to_string(result.strategy))},
                        {"seed", result.seed},
                        {"best", trial_json(result.best)},
                        {"trials", trials}};
    jsonio::write_file(path, doc);
}

SearchResult load_search(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    SearchResult r;
    try {
        r.budget = doc.at("budget").get<int>();
        r.strategy = parse_strategy(doc.at("strategy").get<std::string>());
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.best = trial_from(doc.at("best"));
        for (const auto& t : doc.at("trials")) r.trials.push_back(trial_from(t));
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(path.string() + ": malformed search log: " + e.what());
    }
    return r;
}

}  // namespace privlex::tune
