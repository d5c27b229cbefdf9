#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace cxr {

/// Dense CHW float image. The layout matches what the network consumes.
struct ImageTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ImageTensor() = default;
    ImageTensor(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    float& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const ImageTensor&) const = default;
};

/// Per-channel mean/std of the backbone's pretraining data (ImageNet statistics).
struct ChannelNormalization {
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
};

}  // namespace cxr
