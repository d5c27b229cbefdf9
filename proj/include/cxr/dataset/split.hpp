#pragma once

#include <cstdint>

#include "cxr/dataset/manifest.hpp"

namespace cxr {

struct SplitParams {
    double test_fraction = 0.2;
    /// Validation images targeted per class.
    std::size_t val_count = 10;
    std::uint64_t seed = 0;
};

/// Reassigns every record's split so that splits are a function of patient id.
///
/// Patients are grouped under their most frequent label. Within a class, patients are
/// visited by descending image count (ties: seeded hash of the id, then the id) and
/// greedily placed into test without exceeding the class target, then into val, and
/// the rest go to train. Class targets use cumulative rounding over the classes, so the
/// overall test count stays within one patient's images of test_fraction * N.
///
/// Throws DataError naming a class that has fewer patients than required splits.
DatasetManifest split_by_patient(const DatasetManifest& manifest, const SplitParams& params);

}  // namespace cxr
