#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cxr {

struct BatchPlan {
    std::vector<std::size_t> per_class_counts;

    std::size_t batch_size() const;
};

/// Scales `ratio` by batch_size / sum(ratio). The batch size must be an exact multiple
/// of the ratio sum (std::invalid_argument otherwise).
BatchPlan make_batch_plan(const std::vector<int>& ratio, std::size_t batch_size);

/// Indices into the training set that make up one batch.
using Batch = std::vector<std::size_t>;

/// Class-ratio batch composer.
///
/// Each epoch is one pass over the minority class (the last plan entry): its images are
/// shuffled and each is used exactly once. The other classes are reshuffled at the start
/// of every epoch and drawn without replacement; a pool that runs dry mid-epoch is
/// reshuffled and reused. Every batch matches the plan exactly.
class BatchComposer {
public:
    /// `labels[i]` is the class of training item i. Throws std::invalid_argument if a class
    /// has fewer items than its per-batch count.
    BatchComposer(std::vector<int> labels, BatchPlan plan, std::uint64_t seed);

    std::size_t batches_per_epoch() const;
    std::size_t minority_class() const { return plan_.per_class_counts.size() - 1; }
    const BatchPlan& plan() const { return plan_; }

    /// Pure function of (labels, plan, seed, epoch).
    std::vector<Batch> epoch(std::size_t epoch_index) const;

private:
    std::vector<int> labels_;
    BatchPlan plan_;
    std::uint64_t seed_;
    std::vector<std::vector<std::size_t>> by_class_;
};

}  // namespace cxr
