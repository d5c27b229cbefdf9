#include "cxr/saliency/overlay.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cxr {

cv::Mat render_overlay(const cv::Mat& intensity, const SaliencyMap& map, std::size_t class_index, double alpha) {
    CV_Assert(intensity.type() == CV_32F && intensity.rows == map.height && intensity.cols == map.width);
    const auto& values = map.maps.at(class_index);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = *hi - *lo;

    cv::Mat heat8(map.height, map.width, CV_8U);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const double v = span > 0 ? (map.at(class_index, y, x) - *lo) / span : 0.0;
            heat8.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(v * 255.0);
        }
    cv::Mat heat;
    cv::applyColorMap(heat8, heat, cv::COLORMAP_JET);

    cv::Mat gray8, gray_bgr, out;
    intensity.convertTo(gray8, CV_8U, 255.0);
    cv::cvtColor(gray8, gray_bgr, cv::COLOR_GRAY2BGR);
    cv::addWeighted(heat, alpha, gray_bgr, 1.0 - alpha, 0.0, out);
    return out;
}

void save_overlay(const std::filesystem::path& png, const cv::Mat& intensity, const SaliencyMap& map,
                  std::size_t class_index, double alpha) {
    if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
    cv::imwrite(png.string(), render_overlay(intensity, map, class_index, alpha));
}

}  // namespace cxr
