#pragma once

#include <cstdint>
#include <span>

#include "cxr/metrics/metrics.hpp"

namespace cxr {

/// Macro-averaged F1 of the argmax decisions. A class contributes 2TP/(2TP+FP+FN); a class
/// that never occurs and is never predicted (0/0) is left out of the average, and a class
/// with TP = 0 but some FP or FN contributes 0.
double macro_f1(const PredictionMatrix& pred);

/// Linear-interpolation percentile, q in [0,1].
double percentile(std::vector<double> values, double q);

/// Draws `resamples` samples of `resample_size` rows with replacement and computes macro F1
/// on each. Point estimate is their mean; the CI is the 2.5th/97.5th percentile. Resample r
/// uses its own RNG stream derived from (seed, r), so the result does not depend on
/// evaluation order. Throws std::invalid_argument for zero knobs or an empty matrix.
BootstrapF1 bootstrap_f1(const PredictionMatrix& pred, std::size_t resamples, std::size_t resample_size,
                         std::uint64_t seed);

}  // namespace cxr
