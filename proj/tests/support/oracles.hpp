#pragma once

// Slow, independent reference implementations. None of these call into the library
// code they are used to check.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace privlex::testing {

struct BruteMetrics {
    double acc = 0, ba = 0;
    double p_priv = 0, r_priv = 0, f1_priv = 0;
    double p_pub = 0, r_pub = 0, f1_pub = 0;
    double f1_macro = 0;
    std::vector<std::string> undefined;
};

// Counts by scanning once per metric; zero denominators give 0 and are listed.
BruteMetrics brute_metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

// Plain BCE + L1 objective, recomputed from scratch in long double.
double oracle_objective(std::span<const double> x, std::size_t rows, std::size_t cols,
                        std::span<const std::uint8_t> y, double C, std::span<const double> w, double b);

// Fixed-step proximal gradient (step 1/L from a Frobenius bound) run until the iterate stops
// moving. Returns {w..., b}.
std::vector<double> oracle_lasso_logistic(std::span<const double> x, std::size_t rows, std::size_t cols,
                                          std::span<const std::uint8_t> y, double C, long max_iter = 2'000'000);

// k for a score row, by counting.
std::size_t oracle_k(std::span<const float> scores, double tau);

// Indices of the k best scores via a full sort on (score desc, index asc).
std::vector<std::size_t> oracle_top_k(std::span<const float> scores, std::size_t k);

// BA of "detected iff score > t" against presence labels; classes absent from the labels
// drop out of the average.
double oracle_detection_ba(std::span<const double> scores, std::span<const std::uint8_t> present, double t);

// Maximum BA over every distinct detection set a threshold can produce.
double oracle_best_ba(std::span<const double> scores, std::span<const std::uint8_t> present);

}  // namespace privlex::testing
