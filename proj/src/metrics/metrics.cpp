#include "cxr/metrics/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cxr {

int decide(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("empty score row");
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = static_cast<int>(c);
    return best;
}

namespace {

void check_binary(std::span<const double> scores, std::span<const int> positive, std::size_t& n_pos,
                  std::size_t& n_neg) {
    if (scores.size() != positive.size()) throw std::invalid_argument("scores and labels differ in length");
    n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](int v) { return v != 0; }));
    n_neg = positive.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUROC needs at least one positive and one negative sample");
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> positive) {
    std::size_t n_pos = 0, n_neg = 0;
    check_binary(scores, positive, n_pos, n_neg);
    const auto idx = order_by_score(scores, /*descending=*/false);
    // sum of mid-ranks (1-based) over the positives
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (positive[idx[k]]) rank_sum += mid_rank;
        i = j;
    }
    const double p = static_cast<double>(n_pos);
    const double q = static_cast<double>(n_neg);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> positive) {
    std::size_t n_pos = 0, n_neg = 0;
    check_binary(scores, positive, n_pos, n_neg);
    const auto idx = order_by_score(scores, /*descending=*/true);
    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double threshold = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == threshold) {
            if (positive[idx[i]]) ++tp;
            else ++fp;
            ++i;
        }
        curve.push_back({threshold, static_cast<double>(fp) / static_cast<double>(n_neg),
                         static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
    return area;
}

double mean_auroc(std::span<const double> per_class) {
    if (per_class.empty()) throw std::invalid_argument("no AUROC values to average");
    return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < num_classes; ++c) t += at(c, c);
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < num_classes; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < num_classes; ++t) s += at(t, predicted);
    return s;
}

std::optional<double> ConfusionMatrix::sensitivity(std::size_t c) const {
    const auto denom = row_sum(c);
    if (denom == 0) return std::nullopt;
    return static_cast<double>(at(c, c)) / static_cast<double>(denom);
}

std::optional<double> ConfusionMatrix::ppv(std::size_t c) const {
    const auto denom = column_sum(c);
    if (denom == 0) return std::nullopt;
    return static_cast<double>(at(c, c)) / static_cast<double>(denom);
}

double ConfusionMatrix::accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

ConfusionMatrix confusion_matrix(const PredictionMatrix& pred) {
    ConfusionMatrix cm(pred.num_classes());
    for (std::size_t i = 0; i < pred.num_samples(); ++i)
        ++cm.at(static_cast<std::size_t>(pred.labels[i]), static_cast<std::size_t>(decide(pred.row(i))));
    return cm;
}

EvalReport evaluate(const PredictionMatrix& pred) {
    pred.validate();
    if (pred.num_samples() == 0) throw std::invalid_argument("cannot evaluate an empty prediction matrix");
    EvalReport report;
    report.num_samples = pred.num_samples();
    report.confusion = confusion_matrix(pred);
    report.accuracy = report.confusion.accuracy();

    std::vector<double> available;
    for (std::size_t c = 0; c < pred.num_classes(); ++c) {
        ClassMetrics m;
        m.name = pred.class_names[c];
        m.support = report.confusion.row_sum(c);
        m.sensitivity = report.confusion.sensitivity(c);
        m.ppv = report.confusion.ppv(c);
        if (m.support > 0 && m.support < pred.num_samples()) {
            const auto column = pred.column(c);
            std::vector<int> positive(pred.num_samples());
            for (std::size_t i = 0; i < positive.size(); ++i) positive[i] = pred.labels[i] == static_cast<int>(c);
            m.auroc = auroc(column, positive);
            m.roc = roc_curve(column, positive);
            available.push_back(*m.auroc);
        }
        report.classes.push_back(std::move(m));
    }
    if (!available.empty()) report.mean_auroc = mean_auroc(available);
    return report;
}

}  // namespace cxr
