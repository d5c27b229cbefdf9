#include "cxr/dataset/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cxr/core/errors.hpp"
#include "cxr/core/random.hpp"

namespace cxr {

namespace {

struct Patient {
    std::string id;
    std::vector<std::size_t> records;
    int primary_label = 0;
    std::uint64_t tiebreak = 0;
    std::size_t size() const { return records.size(); }
};

/// Takes patients (in order) whose images fit in `target` while keeping at least `keep`
/// patients back. If nothing fits but the target is positive, takes the smallest one.
std::vector<Patient*> greedy_fill(std::vector<Patient*>& pool, long long target, std::size_t keep) {
    std::vector<Patient*> taken;
    if (target <= 0 || pool.size() <= keep) return taken;
    const std::size_t max_take = pool.size() - keep;
    long long remaining = target;
    for (auto it = pool.begin(); it != pool.end() && taken.size() < max_take;) {
        const auto n = static_cast<long long>((*it)->size());
        if (n <= remaining) {
            remaining -= n;
            taken.push_back(*it);
            it = pool.erase(it);
            if (remaining == 0) break;
        } else {
            ++it;
        }
    }
    if (taken.empty()) {
        taken.push_back(pool.back());
        pool.pop_back();
    }
    return taken;
}

}  // namespace

DatasetManifest split_by_patient(const DatasetManifest& manifest, const SplitParams& params) {
    if (!(params.test_fraction > 0.0 && params.test_fraction < 1.0))
        throw DataError("test_fraction must lie in (0, 1)");
    const std::size_t num_classes = manifest.classes.size();

    std::map<std::string, Patient> patients;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.patient_id.empty()) throw DataError("record " + r.image_path.string() + " has an empty patient id");
        if (r.label < 0 || static_cast<std::size_t>(r.label) >= num_classes)
            throw DataError("record " + r.image_path.string() + " has a label outside the configured classes");
        auto& p = patients[r.patient_id];
        p.id = r.patient_id;
        p.records.push_back(i);
    }

    std::vector<std::vector<Patient*>> by_class(num_classes);
    std::vector<std::size_t> class_images(num_classes, 0);
    for (auto& [id, p] : patients) {
        std::vector<std::size_t> hist(num_classes, 0);
        for (auto i : p.records) ++hist[manifest.records[i].label];
        p.primary_label = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
        p.tiebreak = substream_seed(params.seed, "split:" + id);
        by_class[p.primary_label].push_back(&p);
        class_images[p.primary_label] += p.size();
    }

    const std::size_t required = params.val_count > 0 ? 3 : 2;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (by_class[c].size() < required)
            throw DataError("class " + manifest.classes[c] + " has " + std::to_string(by_class[c].size()) +
                            " patient(s); at least " + std::to_string(required) + " are needed to fill every split");
        std::sort(by_class[c].begin(), by_class[c].end(), [](const Patient* a, const Patient* b) {
            if (a->size() != b->size()) return a->size() > b->size();
            if (a->tiebreak != b->tiebreak) return a->tiebreak < b->tiebreak;
            return a->id < b->id;
        });
    }

    // Smallest classes first so the largest one absorbs the rounding carry.
    std::vector<std::size_t> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return class_images[a] < class_images[b]; });

    DatasetManifest out = manifest;
    for (auto& r : out.records) r.split = Split::Train;
    auto assign = [&](const std::vector<Patient*>& group, Split split) {
        for (const auto* p : group)
            for (auto i : p->records) out.records[i].split = split;
    };

    std::size_t cumulative_images = 0;
    long long assigned_test = 0;
    for (auto c : order) {
        cumulative_images += class_images[c];
        const auto cumulative_target =
            static_cast<long long>(std::llround(params.test_fraction * static_cast<double>(cumulative_images)));
        auto pool = by_class[c];
        const auto test = greedy_fill(pool, cumulative_target - assigned_test, required - 1);
        for (const auto* p : test) assigned_test += static_cast<long long>(p->size());
        assign(test, Split::Test);
        if (params.val_count > 0) assign(greedy_fill(pool, static_cast<long long>(params.val_count), 1), Split::Val);
    }

    out.recount();
    return out;
}

}  // namespace cxr
