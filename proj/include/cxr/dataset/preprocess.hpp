#pragma once

#include <cstdint>
#include <filesystem>

#include <opencv2/core/mat.hpp>

#include "cxr/core/image_tensor.hpp"

namespace cxr {

enum class PreprocessMode { Train, Eval };

struct PreprocessSpec {
    int target_size = 224;
    ChannelNormalization normalization{};
    /// Train-mode only. 0 disables augmentation.
    double horizontal_flip_probability = 0.5;
};

/// Single-channel float image in [0,1], resized to target_size x target_size.
/// This is the raw intensity image before channel replication and normalization.
cv::Mat load_intensity(const std::filesystem::path& path, int target_size);

/// Gray intensity [0,1] -> 3 x S x S normalized tensor (channels replicated).
ImageTensor to_normalized_tensor(const cv::Mat& intensity, const ChannelNormalization& norm);

/// Decode, resize, replicate and normalize one image. Eval mode is a pure function of the
/// file. Train mode applies the flip drawn from `augment_seed`. Throws ImageDecodeError.
ImageTensor load_and_preprocess(const std::filesystem::path& path, const PreprocessSpec& spec, PreprocessMode mode,
                                std::uint64_t augment_seed = 0);

}  // namespace cxr
