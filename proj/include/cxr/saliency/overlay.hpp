#pragma once

#include <filesystem>

#include <opencv2/core/mat.hpp>

#include "cxr/saliency/rise.hpp"

namespace cxr {

/// Heat overlay of one class map on a grayscale intensity image (float, [0,1]).
/// The map is min-max scaled per image; red marks the most important regions.
cv::Mat render_overlay(const cv::Mat& intensity, const SaliencyMap& map, std::size_t class_index, double alpha = 0.5);

void save_overlay(const std::filesystem::path& png, const cv::Mat& intensity, const SaliencyMap& map,
                  std::size_t class_index, double alpha = 0.5);

}  // namespace cxr
