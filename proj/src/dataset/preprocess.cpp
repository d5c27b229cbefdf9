#include "cxr/dataset/preprocess.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cxr/core/errors.hpp"
#include "cxr/core/random.hpp"

namespace cxr {

cv::Mat load_intensity(const std::filesystem::path& path, int target_size) {
    if (target_size <= 0) throw DataError("target_size must be positive");
    cv::Mat raw;
    try {
        raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
    } catch (const cv::Exception&) {
        throw ImageDecodeError(path);
    }
    if (raw.empty()) throw ImageDecodeError(path);

    double scale = 1.0 / 255.0;
    if (raw.depth() == CV_16U) scale = 1.0 / 65535.0;
    else if (raw.depth() == CV_32F || raw.depth() == CV_64F) scale = 1.0;
    cv::Mat gray;
    raw.convertTo(gray, CV_32F, scale);

    if (gray.rows != target_size || gray.cols != target_size) {
        const bool shrinking = gray.rows > target_size && gray.cols > target_size;
        cv::Mat resized;
        cv::resize(gray, resized, cv::Size(target_size, target_size), 0, 0,
                   shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
        gray = resized;
    }
    return gray;
}

ImageTensor to_normalized_tensor(const cv::Mat& intensity, const ChannelNormalization& norm) {
    CV_Assert(intensity.type() == CV_32F);
    ImageTensor t(3, intensity.rows, intensity.cols);
    for (int c = 0; c < 3; ++c) {
        const float mean = norm.mean[c];
        const float inv_std = 1.0f / norm.stddev[c];
        for (int y = 0; y < intensity.rows; ++y) {
            const float* row = intensity.ptr<float>(y);
            for (int x = 0; x < intensity.cols; ++x) t.at(c, y, x) = (row[x] - mean) * inv_std;
        }
    }
    return t;
}

ImageTensor load_and_preprocess(const std::filesystem::path& path, const PreprocessSpec& spec, PreprocessMode mode,
                                std::uint64_t augment_seed) {
    cv::Mat gray = load_intensity(path, spec.target_size);
    if (mode == PreprocessMode::Train && spec.horizontal_flip_probability > 0.0) {
        auto rng = substream(augment_seed, "hflip");
        if (unit_uniform(rng) < spec.horizontal_flip_probability) {
            cv::Mat flipped;
            cv::flip(gray, flipped, 1);
            gray = flipped;
        }
    }
    return to_normalized_tensor(gray, spec.normalization);
}

}  // namespace cxr
