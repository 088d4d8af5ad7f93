#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace privlex::testing {

namespace {

double safe_div(double num, double den, const char* name, std::vector<std::string>& undefined) {
    if (den == 0) {
        undefined.emplace_back(name);
        return 0.0;
    }
    return num / den;
}

}  // namespace

BruteMetrics brute_metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
    auto count = [&](int p, int t) {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] == p && truth[i] == t) ++n;
        return static_cast<double>(n);
    };
    const double tp = count(1, 1), fp = count(1, 0), tn = count(0, 0), fn = count(0, 1);

    BruteMetrics m;
    m.acc = safe_div(tp + tn, static_cast<double>(pred.size()), "acc", m.undefined);
    m.p_priv = safe_div(tp, tp + fp, "p_priv", m.undefined);
    m.r_priv = safe_div(tp, tp + fn, "r_priv", m.undefined);
    m.f1_priv = m.p_priv + m.r_priv == 0 ? (m.undefined.emplace_back("f1_priv"), 0.0)
                                         : 2 * m.p_priv * m.r_priv / (m.p_priv + m.r_priv);
    m.p_pub = safe_div(tn, tn + fn, "p_pub", m.undefined);
    m.r_pub = safe_div(tn, tn + fp, "r_pub", m.undefined);
    m.f1_pub = m.p_pub + m.r_pub == 0 ? (m.undefined.emplace_back("f1_pub"), 0.0)
                                      : 2 * m.p_pub * m.r_pub / (m.p_pub + m.r_pub);
    const bool priv = tp + fn > 0, pub = tn + fp > 0;
    if (priv && pub) m.ba = (m.r_priv + m.r_pub) / 2;
    else if (priv) m.ba = m.r_priv;
    else if (pub) m.ba = m.r_pub;
    else m.undefined.emplace_back("ba");
    m.f1_macro = (m.f1_priv + m.f1_pub) / 2;
    return m;
}

double oracle_objective(std::span<const double> x, std::size_t rows, std::size_t cols,
                        std::span<const std::uint8_t> y, double C, std::span<const double> w, double b) {
    long double loss = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        long double z = b;
        for (std::size_t j = 0; j < cols; ++j) z += static_cast<long double>(w[j]) * x[i * cols + j];
        // log(1 + e^z) - y z, written to stay finite for large |z|
        const long double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += softplus - y[i] * z;
    }
    long double l1 = 0;
    for (double v : w) l1 += std::fabs(static_cast<long double>(v));
    return static_cast<double>(loss / rows + l1 / (C * rows));
}

std::vector<double> oracle_lasso_logistic(std::span<const double> x, std::size_t rows, std::size_t cols,
                                          std::span<const std::uint8_t> y, double C, long max_iter) {
    // Hessian of the mean BCE is bounded by ||[X 1]||_F^2 / (4N).
    double frob = static_cast<double>(rows);
    for (double v : x) frob += v * v;
    const double step = 4.0 * static_cast<double>(rows) / frob;
    const double lambda = 1.0 / (C * static_cast<double>(rows));

    std::vector<double> w(cols, 0.0), g(cols);
    double b = 0.0;
    for (long it = 0; it < max_iter; ++it) {
        std::fill(g.begin(), g.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            double z = b;
            for (std::size_t j = 0; j < cols; ++j) z += w[j] * x[i * cols + j];
            const double r = 1.0 / (1.0 + std::exp(-z)) - y[i];
            for (std::size_t j = 0; j < cols; ++j) g[j] += r * x[i * cols + j];
            gb += r;
        }
        double moved = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double u = w[j] - step * g[j] / static_cast<double>(rows);
            const double nw = std::copysign(std::max(std::fabs(u) - step * lambda, 0.0), u);
            moved = std::max(moved, std::fabs(nw - w[j]));
            w[j] = nw;
        }
        const double nb = b - step * gb / static_cast<double>(rows);
        moved = std::max(moved, std::fabs(nb - b));
        b = nb;
        if (moved < 1e-15) break;
    }
    w.push_back(b);
    return w;
}

std::size_t oracle_k(std::span<const float> scores, double tau) {
    std::size_t above = 0;
    for (float s : scores)
        if (static_cast<double>(s) > tau) ++above;
    return std::min(std::max<std::size_t>(above, 3), scores.size());
}

std::vector<std::size_t> oracle_top_k(std::span<const float> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    idx.resize(k);
    return idx;
}

double oracle_detection_ba(std::span<const double> scores, std::span<const std::uint8_t> present, double t) {
    std::vector<std::uint8_t> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > t ? 1 : 0;
    return brute_metrics(pred, present).ba;
}

double oracle_best_ba(std::span<const double> scores, std::span<const std::uint8_t> present) {
    // Thresholds at each score value plus -inf produce every reachable detection set.
    double best = oracle_detection_ba(scores, present, -std::numeric_limits<double>::infinity());
    for (double t : scores) best = std::max(best, oracle_detection_ba(scores, present, t));
    return best;
}

}  // namespace privlex::testing
