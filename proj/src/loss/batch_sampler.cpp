#include "cxr/loss/batch_sampler.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "cxr/core/random.hpp"

namespace cxr {

std::size_t BatchPlan::batch_size() const {
    return std::accumulate(per_class_counts.begin(), per_class_counts.end(), std::size_t{0});
}

BatchPlan make_batch_plan(const std::vector<int>& ratio, std::size_t batch_size) {
    if (ratio.empty()) throw std::invalid_argument("empty sampling ratio");
    std::size_t sum = 0;
    for (int r : ratio) {
        if (r < 1) throw std::invalid_argument("sampling ratio entries must be >= 1");
        sum += static_cast<std::size_t>(r);
    }
    if (batch_size == 0 || batch_size % sum != 0)
        throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                    " is not a multiple of the ratio sum " + std::to_string(sum));
    const std::size_t k = batch_size / sum;
    BatchPlan plan;
    for (int r : ratio) plan.per_class_counts.push_back(static_cast<std::size_t>(r) * k);
    return plan;
}

BatchComposer::BatchComposer(std::vector<int> labels, BatchPlan plan, std::uint64_t seed)
    : labels_(std::move(labels)), plan_(std::move(plan)), seed_(seed), by_class_(plan_.per_class_counts.size()) {
    if (plan_.per_class_counts.empty()) throw std::invalid_argument("empty batch plan");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const int c = labels_[i];
        if (c < 0 || static_cast<std::size_t>(c) >= by_class_.size())
            throw std::invalid_argument("training label out of range of the batch plan");
        by_class_[c].push_back(i);
    }
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
        if (by_class_[c].size() < plan_.per_class_counts[c])
            throw std::invalid_argument("class " + std::to_string(c) + " has " + std::to_string(by_class_[c].size()) +
                                        " training images but the plan needs " +
                                        std::to_string(plan_.per_class_counts[c]) + " per batch");
    }
}

std::size_t BatchComposer::batches_per_epoch() const {
    const auto m = minority_class();
    return by_class_[m].size() / plan_.per_class_counts[m];
}

std::vector<Batch> BatchComposer::epoch(std::size_t epoch_index) const {
    auto rng = substream(seed_, "sampler", epoch_index);
    const std::size_t num_classes = by_class_.size();

    std::vector<std::vector<std::size_t>> pools = by_class_;
    std::vector<std::size_t> cursor(num_classes, 0);
    for (auto& pool : pools) portable_shuffle(pool.begin(), pool.end(), rng);

    const std::size_t n_batches = batches_per_epoch();
    std::vector<Batch> batches;
    batches.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        Batch batch;
        batch.reserve(plan_.batch_size());
        for (std::size_t c = 0; c < num_classes; ++c) {
            const std::size_t need = plan_.per_class_counts[c];
            auto& pool = pools[c];
            if (pool.size() - cursor[c] < need) {
                // leftovers first, then they move to the back of the next cycle
                std::vector<std::size_t> tail(pool.begin() + static_cast<std::ptrdiff_t>(cursor[c]), pool.end());
                batch.insert(batch.end(), tail.begin(), tail.end());
                pool.resize(cursor[c]);
                portable_shuffle(pool.begin(), pool.end(), rng);
                pool.insert(pool.end(), tail.begin(), tail.end());
                cursor[c] = 0;
                for (std::size_t k = tail.size(); k < need; ++k) batch.push_back(pool[cursor[c]++]);
            } else {
                for (std::size_t k = 0; k < need; ++k) batch.push_back(pool[cursor[c]++]);
            }
        }
        portable_shuffle(batch.begin(), batch.end(), rng);
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace cxr
