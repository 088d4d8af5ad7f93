#include "privlex/metrics.hpp"

#include "privlex/error.hpp"

namespace privlex::metrics {

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
    if (pred.size() != truth.size())
        throw ValidationError("confusion: " + std::to_string(pred.size()) + " predictions for " +
                              std::to_string(truth.size()) + " labels");
    if (pred.empty()) throw ValidationError("confusion: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, t = truth[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {
double ratio(std::uint64_t num, std::uint64_t den, const char* name, std::vector<std::string>& undefined) {
    if (den == 0) {
        undefined.emplace_back(name);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double f1(double p, double r, const char* name, std::vector<std::string>& undefined) {
    if (p + r == 0.0) {
        undefined.emplace_back(name);
        return 0.0;
    }
    return 2.0 * p * r / (p + r);
}
}  // namespace

Report report(const ConfusionCounts& c) {
    Report r;
    r.acc = ratio(c.tp + c.tn, c.total(), "acc", r.undefined);
    r.p_priv = ratio(c.tp, c.tp + c.fp, "p_priv", r.undefined);
    r.r_priv = ratio(c.tp, c.tp + c.fn, "r_priv", r.undefined);
    r.f1_priv = f1(r.p_priv, r.r_priv, "f1_priv", r.undefined);
    r.p_pub = ratio(c.tn, c.tn + c.fn, "p_pub", r.undefined);
    r.r_pub = ratio(c.tn, c.tn + c.fp, "r_pub", r.undefined);
    r.f1_pub = f1(r.p_pub, r.r_pub, "f1_pub", r.undefined);

    const bool has_priv = c.tp + c.fn > 0, has_pub = c.tn + c.fp > 0;
    if (has_priv && has_pub)
        r.ba = (r.r_priv + r.r_pub) / 2.0;
    else if (has_priv)
        r.ba = r.r_priv;
    else if (has_pub)
        r.ba = r.r_pub;
    else
        r.undefined.emplace_back("ba");
    r.f1_macro = (r.f1_priv + r.f1_pub) / 2.0;
    return r;
}

Report evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
    return report(confusion(pred, truth));
}

}  // namespace privlex::metrics
