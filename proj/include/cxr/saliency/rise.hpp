#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/core/image_tensor.hpp"

namespace cxr {

struct MaskSpec {
    std::size_t num_masks = 1000;
    /// Coarse binary grid is grid x grid cells.
    int grid = 7;
    /// Probability that a grid cell is kept. 1 gives all-ones masks.
    double keep_probability = 0.5;
    int height = 224;
    int width = 224;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Mask i: Bernoulli(keep_probability) grid, bilinearly upsampled to (grid+1) cells and
/// cropped at a random sub-cell offset. 1 x height x width, values in [0,1]. Pure function
/// of (spec, index).
ImageTensor generate_mask(const MaskSpec& spec, std::size_t index);
std::vector<ImageTensor> generate_masks(const MaskSpec& spec);

/// Multiplies in raw intensity space when `norm` is given (denormalize, mask, renormalize),
/// so masked-out pixels are black; otherwise multiplies the tensor directly.
ImageTensor apply_mask(const ImageTensor& image, const ImageTensor& mask,
                       const std::optional<ChannelNormalization>& norm);

/// Scores a batch of images: one row of C scores per image.
using BatchScorer = std::function<std::vector<std::vector<double>>(const std::vector<ImageTensor>&)>;

struct SaliencyMap {
    std::vector<std::string> classes;
    int height = 0;
    int width = 0;
    /// One row-major height x width grid per class.
    std::vector<std::vector<double>> maps;
    /// Scores of the unmasked image.
    std::vector<double> base_scores;
    /// Sums were divided by num_masks * keep_probability.
    double normalizer = 1.0;
    MaskSpec spec;

    double at(std::size_t c, int y, int x) const { return maps[c][static_cast<std::size_t>(y) * width + x]; }
};

class SaliencyError : public std::runtime_error {
public:
    SaliencyError(std::size_t mask_index, const std::string& what)
        : std::runtime_error("scoring failed on mask " + std::to_string(mask_index) + ": " + what),
          mask_index_(mask_index) {}
    std::size_t mask_index() const noexcept { return mask_index_; }

private:
    std::size_t mask_index_;
};

/// saliency_c = 1/(N p) * sum_i score_c(image * mask_i) * mask_i.
/// Masks are scored in batches of `batch_size`. Throws SaliencyError naming the first mask
/// whose scoring failed or returned a malformed, negative or non-finite row.
SaliencyMap rise_saliency(const BatchScorer& scorer, const ImageTensor& image, const MaskSpec& spec,
                          const std::vector<std::string>& classes,
                          const std::optional<ChannelNormalization>& norm = std::nullopt,
                          std::size_t batch_size = 32);

nlohmann::json saliency_to_json(const SaliencyMap& map);

}  // namespace cxr
