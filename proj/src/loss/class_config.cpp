#include "cxr/loss/class_config.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>

namespace cxr {

std::vector<ClassWeight> compute_class_weights(std::span<const std::int64_t> positives) {
    const auto total = std::accumulate(positives.begin(), positives.end(), std::int64_t{0});
    return compute_class_weights(positives, total);
}

std::vector<ClassWeight> compute_class_weights(std::span<const std::int64_t> positives, std::int64_t total) {
    if (positives.empty()) throw std::invalid_argument("no classes given");
    if (std::accumulate(positives.begin(), positives.end(), std::int64_t{0}) != total)
        throw std::invalid_argument("total must equal the sum of per-class positives");
    std::vector<ClassWeight> out;
    out.reserve(positives.size());
    for (std::size_t c = 0; c < positives.size(); ++c) {
        if (positives[c] <= 0)
            throw std::invalid_argument("class " + std::to_string(c) + " has no positive training samples");
        if (positives[c] >= total)
            throw std::invalid_argument("class " + std::to_string(c) + " has no negative training samples");
        out.push_back({positives[c], total});
    }
    return out;
}

void ClassConfig::validate() const {
    if (classes.size() < 2) throw std::invalid_argument("need at least two classes");
    if (weights.size() != classes.size()) throw std::invalid_argument("one weight pair per class required");
    if (sampling_ratio.size() != classes.size()) throw std::invalid_argument("one sampling ratio entry per class required");
    for (const auto& w : weights)
        if (w.positives <= 0 || w.positives >= w.total) throw std::invalid_argument("class weights must lie in (0,1)");
    for (int r : sampling_ratio)
        if (r < 1) throw std::invalid_argument("sampling ratio entries must be >= 1");
}

std::vector<int> parse_ratio(std::string_view text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find(':', pos);
        if (end == std::string_view::npos) end = text.size();
        auto part = text.substr(pos, end - pos);
        int value = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size())
            throw std::invalid_argument("malformed sampling ratio '" + std::string(text) + "'");
        if (value < 1) throw std::invalid_argument("sampling ratio entries must be >= 1");
        out.push_back(value);
        pos = end + 1;
    }
    return out;
}

std::string format_ratio(const std::vector<int>& ratio) {
    std::string out;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        if (i) out += ':';
        out += std::to_string(ratio[i]);
    }
    return out;
}

std::vector<int> default_sampling_ratio(ClassMode mode) {
    return mode == ClassMode::FourClass ? std::vector<int>{5, 5, 5, 1} : std::vector<int>{7, 7, 1};
}

}  // namespace cxr
