#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cxr/core/image_tensor.hpp"
#include "cxr/saliency/overlay.hpp"
#include "cxr/saliency/rise.hpp"
#include "support/fixtures.hpp"

using namespace cxr;

namespace {

ImageTensor constant_image(int size, float value) {
    return ImageTensor(3, size, size, value);
}

/// Two scores: mean of channel 0 inside a box, and a constant.
BatchScorer box_scorer(int y0, int x0, int h, int w) {
    return [=](const std::vector<ImageTensor>& batch) {
        std::vector<std::vector<double>> rows;
        for (const auto& img : batch) {
            double s = 0.0;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) s += img.at(0, y, x);
            rows.push_back({s / (h * w), 0.25});
        }
        return rows;
    };
}

}  // namespace

TEST_CASE("masks are seeded, bounded and keep about p of the image") {
    MaskSpec spec;
    spec.height = spec.width = 32;
    spec.seed = 4;
    spec.num_masks = 200;
    double mean = 0.0;
    for (std::size_t i = 0; i < spec.num_masks; ++i) {
        const auto m = generate_mask(spec, i);
        REQUIRE(m.channels == 1);
        REQUIRE(m.height == 32);
        CHECK(m == generate_mask(spec, i));
        for (float v : m.data) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
            mean += v;
        }
    }
    mean /= 200.0 * 32 * 32;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
    CHECK_FALSE(generate_mask(spec, 0) == generate_mask(spec, 1));
}

TEST_CASE("mask spec validation") {
    MaskSpec spec;
    spec.keep_probability = 0.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.keep_probability = 1.0;
    CHECK_NOTHROW(spec.validate());
    spec.grid = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("apply_mask zeroes raw intensity when normalization is given") {
    ChannelNormalization norm;
    auto img = constant_image(4, 1.0f);
    ImageTensor zero(1, 4, 4, 0.0f);
    const auto masked = apply_mask(img, zero, norm);
    for (int c = 0; c < 3; ++c)
        CHECK(masked.at(c, 1, 1) == doctest::Approx(-norm.mean[c] / norm.stddev[c]).epsilon(1e-6));
    const auto plain = apply_mask(img, zero, std::nullopt);
    CHECK(plain.at(0, 1, 1) == 0.0f);
}

TEST_CASE("saliency of a box scorer peaks in the box and is nonnegative") {
    MaskSpec spec;
    spec.height = spec.width = 48;
    spec.num_masks = 500;
    spec.seed = 12;
    const auto map = rise_saliency(box_scorer(30, 6, 10, 10), constant_image(48, 1.0f), spec, {"box", "flat"});
    REQUIRE(map.maps.size() == 2);
    const auto& m = map.maps[0];
    CHECK(*std::min_element(m.begin(), m.end()) >= 0.0);
    const auto peak = static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
    CHECK(peak / 48 >= 30);
    CHECK(peak / 48 < 40);
    CHECK(peak % 48 >= 6);
    CHECK(peak % 48 < 16);
    CHECK(map.normalizer == doctest::Approx(250.0));
    // a constant score spreads evenly: the mean over pixels approaches the score
    double flat = 0.0;
    for (double v : map.maps[1]) flat += v;
    CHECK(flat / (48.0 * 48.0) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("keep probability 1 leaves the scores unchanged") {
    MaskSpec spec;
    spec.height = spec.width = 16;
    spec.num_masks = 5;
    spec.keep_probability = 1.0;
    std::size_t calls = 0;
    const auto image = constant_image(16, 0.7f);
    BatchScorer scorer = [&](const std::vector<ImageTensor>& batch) {
        std::vector<std::vector<double>> rows;
        for (const auto& img : batch) {
            ++calls;
            CHECK(img == image);
            rows.push_back({img.at(0, 3, 3)});
        }
        return rows;
    };
    const auto map = rise_saliency(scorer, image, spec, {"x"});
    CHECK(calls == 6);
    for (double v : map.maps[0]) CHECK(v == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("a failing scorer names the mask") {
    MaskSpec spec;
    spec.height = spec.width = 8;
    spec.num_masks = 10;
    std::size_t seen = 0;
    BatchScorer scorer = [&](const std::vector<ImageTensor>& batch) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < batch.size(); ++i) rows.push_back({seen++ == 7 ? NAN : 0.5});
        return rows;
    };
    try {
        rise_saliency(scorer, constant_image(8, 1.0f), spec, {"x"}, std::nullopt, 4);
        FAIL("expected SaliencyError");
    } catch (const SaliencyError& e) {
        CHECK(e.mask_index() == 6);
    }
}

TEST_CASE("overlay renders a color image of the input size") {
    MaskSpec spec;
    spec.height = spec.width = 24;
    spec.num_masks = 20;
    const auto map = rise_saliency(box_scorer(0, 0, 8, 8), constant_image(24, 1.0f), spec, {"box", "flat"});
    cv::Mat gray(24, 24, CV_32F, cv::Scalar(0.5));
    const auto out = render_overlay(gray, map, 0);
    CHECK(out.rows == 24);
    CHECK(out.cols == 24);
    CHECK(out.channels() == 3);
    testing::TempDir dir("overlay");
    save_overlay(dir / "o.png", gray, map, 0);
    CHECK(std::filesystem::exists(dir / "o.png"));
}
