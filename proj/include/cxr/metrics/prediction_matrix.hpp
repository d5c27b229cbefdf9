#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cxr {

/// N x C per-class confidence scores with ground truth. Scores are row-major.
struct PredictionMatrix {
    std::vector<std::string> class_names;
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    std::vector<double> scores;

    std::size_t num_samples() const { return labels.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::span<const double> row(std::size_t i) const { return {scores.data() + i * num_classes(), num_classes()}; }
    double score(std::size_t i, std::size_t c) const { return scores[i * num_classes() + c]; }
    std::vector<double> column(std::size_t c) const;

    /// Sub-matrix of the given rows (repeats allowed).
    PredictionMatrix select(std::span<const std::size_t> rows) const;

    /// Throws std::invalid_argument on shape mismatch, non-finite scores or labels >= C.
    void validate() const;
};

/// Text format: header `sample_id<TAB>label<TAB><class_1>...<class_C>`, then one line per sample
/// with its id, true class name and C scores.
void write_predictions(std::ostream& out, const PredictionMatrix& pred);
void save_predictions(const std::filesystem::path& file, const PredictionMatrix& pred);
PredictionMatrix read_predictions(std::istream& in);
PredictionMatrix load_predictions(const std::filesystem::path& file);

}  // namespace cxr
