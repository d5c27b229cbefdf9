#include "cxr/metrics/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cxr/core/random.hpp"

namespace cxr {

double macro_f1(const PredictionMatrix& pred) {
    const auto cm = confusion_matrix(pred);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const auto tp = cm.at(c, c);
        const auto fn = cm.row_sum(c) - tp;
        const auto fp = cm.column_sum(c) - tp;
        const auto denom = 2 * tp + fp + fn;
        if (denom == 0) continue;
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

BootstrapF1 bootstrap_f1(const PredictionMatrix& pred, std::size_t resamples, std::size_t resample_size,
                         std::uint64_t seed) {
    if (resamples == 0 || resample_size == 0) throw std::invalid_argument("bootstrap knobs must be >= 1");
    pred.validate();
    const auto n = pred.num_samples();
    if (n == 0) throw std::invalid_argument("cannot bootstrap an empty prediction matrix");

    std::vector<double> f1(resamples);
    std::vector<std::size_t> rows(resample_size);
    for (std::size_t r = 0; r < resamples; ++r) {
        auto rng = substream(seed, "bootstrap", r);
        for (auto& row : rows) row = uniform_below(rng, n);
        f1[r] = macro_f1(pred.select(rows));
    }
    BootstrapF1 out;
    out.resamples = resamples;
    out.resample_size = resample_size;
    out.seed = seed;
    double sum = 0.0;
    for (double v : f1) sum += v;
    out.point = sum / static_cast<double>(resamples);
    out.ci_low = percentile(f1, 0.025);
    out.ci_high = percentile(f1, 0.975);
    return out;
}

}  // namespace cxr
