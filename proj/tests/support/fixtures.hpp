#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cxr/dataset/manifest.hpp"

namespace cxr::testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("cxr-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

/// Writes an 8-bit grayscale image filled with `value`, plus a bright square at (x, y).
inline void write_gray_png(const fs::path& file, int size, int value, int square = 0, int x = 0, int y = 0) {
    fs::create_directories(file.parent_path());
    cv::Mat img(size, size, CV_8UC1, cv::Scalar(value));
    if (square > 0) img(cv::Rect(x, y, square, square)).setTo(255);
    cv::imwrite(file.string(), img);
}

/// Toy manifest: `patients` patients, each with 1..max_images images of one class.
/// Every class gets at least `min_per_class` patients.
inline DatasetManifest random_manifest(std::mt19937_64& rng, std::size_t num_classes, std::size_t patients,
                                       std::size_t max_images, std::size_t min_per_class = 3) {
    DatasetManifest m;
    for (std::size_t c = 0; c < num_classes; ++c) m.classes.push_back("class" + std::to_string(c));
    std::uniform_int_distribution<std::size_t> images(1, max_images);
    std::uniform_int_distribution<std::size_t> cls(0, num_classes - 1);
    for (std::size_t p = 0; p < patients; ++p) {
        const auto label = p < num_classes * min_per_class ? p % num_classes : cls(rng);
        const auto n = images(rng);
        for (std::size_t i = 0; i < n; ++i) {
            m.records.push_back({"img/p" + std::to_string(p) + "_" + std::to_string(i) + ".png",
                                 "p" + std::to_string(p), static_cast<int>(label), Split::Train});
        }
    }
    m.recount();
    return m;
}

}  // namespace cxr::testing
