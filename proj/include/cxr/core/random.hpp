#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cxr {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named component stream ("split", "sampler", "augment", ...),
/// optionally indexed (epoch, resample, mask). Pure function of its inputs.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return std::mt19937_64(substream_seed(seed, name, index));
}

/// Uniform double in [0, 1) from the top 53 bits; unlike std::uniform_real_distribution
/// this is identical across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, portable across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Fisher-Yates with uniform_below.
template <typename It>
void portable_shuffle(It first, It last, std::mt19937_64& rng) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        auto j = uniform_below(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace cxr
