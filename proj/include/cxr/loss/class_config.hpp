#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/core/classes.hpp"

namespace cxr {

/// Loss weights for one class, kept as the exact counts they come from:
/// w+ = N_c / (N_c + P_c), w- = P_c / (N_c + P_c), with N_c + P_c the training total.
struct ClassWeight {
    std::int64_t positives = 0;
    std::int64_t total = 0;

    std::int64_t negatives() const { return total - positives; }
    double pos_weight() const { return static_cast<double>(negatives()) / static_cast<double>(total); }
    double neg_weight() const { return static_cast<double>(positives) / static_cast<double>(total); }

    bool operator==(const ClassWeight&) const = default;
};

/// Throws std::invalid_argument if any count is zero (degenerate weights) or if a class
/// holds every sample.
std::vector<ClassWeight> compute_class_weights(std::span<const std::int64_t> positives);

/// Variant with an explicit total; it must equal the sum of positives.
std::vector<ClassWeight> compute_class_weights(std::span<const std::int64_t> positives, std::int64_t total);

struct ClassConfig {
    std::vector<std::string> classes;
    std::vector<ClassWeight> weights;
    /// Per-batch class ratio; the last entry is the minority class the sampler paces epochs by.
    std::vector<int> sampling_ratio;

    std::size_t num_classes() const { return classes.size(); }
    void validate() const;
};

/// "5:5:5:1" -> {5,5,5,1}. Throws std::invalid_argument on malformed text or entries < 1.
std::vector<int> parse_ratio(std::string_view text);
std::string format_ratio(const std::vector<int>& ratio);

/// 5:5:5:1 for four classes, 7:7:1 for three.
std::vector<int> default_sampling_ratio(ClassMode mode);

}  // namespace cxr
