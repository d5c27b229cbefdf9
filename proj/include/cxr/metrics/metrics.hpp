#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/metrics/prediction_matrix.hpp"

namespace cxr {

/// Predicted class: index of the highest score, lowest index on ties.
int decide(std::span<const double> row);

/// Area under the ROC curve for `scores` against 0/1 `positive` flags, computed from
/// mid-ranks: P(score_pos > score_neg) + 0.5 P(tie). O(N log N).
/// Throws std::invalid_argument unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> positive);

struct RocPoint {
    double threshold;  // predict positive when score >= threshold
    double fpr;
    double tpr;
};

/// Exact ROC curve with one point per distinct score, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> positive);

/// Trapezoidal area under a ROC curve.
double trapezoid_area(std::span<const RocPoint> curve);

/// Arithmetic mean of per-class AUROCs.
double mean_auroc(std::span<const double> per_class);

/// Rows are ground truth, columns are argmax predictions.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;

    explicit ConfusionMatrix(std::size_t c = 0) : num_classes(c), counts(c * c, 0) {}
    std::size_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * num_classes + predicted]; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * num_classes + predicted]; }
    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t truth) const;
    std::size_t column_sum(std::size_t predicted) const;

    /// TP/(TP+FN); empty when the class never occurs.
    std::optional<double> sensitivity(std::size_t c) const;
    /// TP/(TP+FP); empty when the class is never predicted.
    std::optional<double> ppv(std::size_t c) const;
    double accuracy() const;
};

ConfusionMatrix confusion_matrix(const PredictionMatrix& pred);

struct ClassMetrics {
    std::string name;
    std::size_t support = 0;
    std::optional<double> auroc;  // unavailable when the class is absent (or is every sample)
    std::optional<double> sensitivity;
    std::optional<double> ppv;
    std::vector<RocPoint> roc;
};

struct BootstrapF1 {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t resamples = 0;
    std::size_t resample_size = 0;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::vector<ClassMetrics> classes;
    ConfusionMatrix confusion;
    std::size_t num_samples = 0;
    double accuracy = 0.0;
    /// Mean over the classes whose AUROC is available.
    std::optional<double> mean_auroc;
    std::optional<BootstrapF1> bootstrap;
};

/// One-vs-rest AUROC and ROC per class plus argmax-based confusion, accuracy,
/// sensitivity and PPV. Throws std::invalid_argument for an empty or malformed matrix.
EvalReport evaluate(const PredictionMatrix& pred);

}  // namespace cxr
