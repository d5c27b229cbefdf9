#include "cxr/saliency/rise.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "cxr/core/random.hpp"

namespace cxr {

void MaskSpec::validate() const {
    if (num_masks < 1) throw std::invalid_argument("num_masks must be >= 1");
    if (grid < 1) throw std::invalid_argument("mask grid must be >= 1");
    if (!(keep_probability > 0.0 && keep_probability <= 1.0))
        throw std::invalid_argument("keep_probability must lie in (0, 1]");
    if (height < 1 || width < 1) throw std::invalid_argument("mask size must be positive");
}

ImageTensor generate_mask(const MaskSpec& spec, std::size_t index) {
    if (spec.keep_probability >= 1.0) return ImageTensor(1, spec.height, spec.width, 1.0f);

    auto rng = substream(spec.seed, "rise-mask", index);
    cv::Mat cells(spec.grid, spec.grid, CV_32F);
    for (int y = 0; y < spec.grid; ++y)
        for (int x = 0; x < spec.grid; ++x) cells.at<float>(y, x) = unit_uniform(rng) < spec.keep_probability ? 1.f : 0.f;

    const int cell_h = (spec.height + spec.grid - 1) / spec.grid;
    const int cell_w = (spec.width + spec.grid - 1) / spec.grid;
    cv::Mat up;
    cv::resize(cells, up, cv::Size((spec.grid + 1) * cell_w, (spec.grid + 1) * cell_h), 0, 0, cv::INTER_LINEAR);
    const int dy = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(cell_h)));
    const int dx = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(cell_w)));

    ImageTensor mask(1, spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y) {
        const float* row = up.ptr<float>(y + dy);
        for (int x = 0; x < spec.width; ++x) mask.at(0, y, x) = std::clamp(row[x + dx], 0.0f, 1.0f);
    }
    return mask;
}

std::vector<ImageTensor> generate_masks(const MaskSpec& spec) {
    spec.validate();
    std::vector<ImageTensor> masks;
    masks.reserve(spec.num_masks);
    for (std::size_t i = 0; i < spec.num_masks; ++i) masks.push_back(generate_mask(spec, i));
    return masks;
}

ImageTensor apply_mask(const ImageTensor& image, const ImageTensor& mask,
                       const std::optional<ChannelNormalization>& norm) {
    if (mask.height != image.height || mask.width != image.width)
        throw std::invalid_argument("mask and image sizes differ");
    ImageTensor out = image;
    for (int c = 0; c < image.channels; ++c) {
        const float mean = norm ? norm->mean[static_cast<std::size_t>(c % 3)] : 0.0f;
        const float sd = norm ? norm->stddev[static_cast<std::size_t>(c % 3)] : 1.0f;
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const float m = mask.at(0, y, x);
                if (norm) out.at(c, y, x) = ((image.at(c, y, x) * sd + mean) * m - mean) / sd;
                else out.at(c, y, x) = image.at(c, y, x) * m;
            }
        }
    }
    return out;
}

SaliencyMap rise_saliency(const BatchScorer& scorer, const ImageTensor& image, const MaskSpec& spec,
                          const std::vector<std::string>& classes, const std::optional<ChannelNormalization>& norm,
                          std::size_t batch_size) {
    spec.validate();
    if (image.height != spec.height || image.width != spec.width)
        throw std::invalid_argument("image size does not match the mask spec");
    if (batch_size == 0) batch_size = 1;
    const std::size_t num_classes = classes.size();
    const std::size_t pixels = static_cast<std::size_t>(spec.height) * spec.width;

    SaliencyMap out;
    out.classes = classes;
    out.height = spec.height;
    out.width = spec.width;
    out.spec = spec;
    out.maps.assign(num_classes, std::vector<double>(pixels, 0.0));
    out.normalizer = static_cast<double>(spec.num_masks) * spec.keep_probability;

    auto check_row = [&](const std::vector<double>& row, std::size_t index) {
        if (row.size() != num_classes)
            throw SaliencyError(index, "expected " + std::to_string(num_classes) + " scores, got " +
                                           std::to_string(row.size()));
        for (double s : row)
            if (!std::isfinite(s) || s < 0.0) throw SaliencyError(index, "score outside [0, inf)");
    };

    {
        const auto base = scorer({image});
        if (base.size() != 1) throw SaliencyError(0, "scorer returned no row for the unmasked image");
        out.base_scores = base.front();
    }

    for (std::size_t start = 0; start < spec.num_masks; start += batch_size) {
        const std::size_t end = std::min(spec.num_masks, start + batch_size);
        std::vector<ImageTensor> masks, batch;
        for (std::size_t i = start; i < end; ++i) {
            masks.push_back(generate_mask(spec, i));
            batch.push_back(apply_mask(image, masks.back(), norm));
        }
        std::vector<std::vector<double>> scores;
        try {
            scores = scorer(batch);
        } catch (const std::exception& e) {
            throw SaliencyError(start, e.what());
        }
        if (scores.size() != batch.size())
            throw SaliencyError(start + std::min(scores.size(), batch.size()), "scorer returned too few rows");
        for (std::size_t k = 0; k < scores.size(); ++k) {
            check_row(scores[k], start + k);
            const auto& m = masks[k].data;
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double s = scores[k][c];
                auto& acc = out.maps[c];
                for (std::size_t p = 0; p < pixels; ++p) acc[p] += s * m[p];
            }
        }
    }
    for (auto& map : out.maps)
        for (auto& v : map) v /= out.normalizer;
    return out;
}

nlohmann::json saliency_to_json(const SaliencyMap& map) {
    nlohmann::json maps = nlohmann::json::object();
    for (std::size_t c = 0; c < map.classes.size(); ++c) {
        nlohmann::json rows = nlohmann::json::array();
        for (int y = 0; y < map.height; ++y) {
            const auto begin = map.maps[c].begin() + static_cast<std::ptrdiff_t>(y) * map.width;
            rows.push_back(std::vector<double>(begin, begin + map.width));
        }
        maps[map.classes[c]] = std::move(rows);
    }
    return {{"mask_spec",
             {{"num_masks", map.spec.num_masks},
              {"grid", map.spec.grid},
              {"keep_probability", map.spec.keep_probability},
              {"height", map.spec.height},
              {"width", map.spec.width},
              {"seed", map.spec.seed},
              {"upsampling", "bilinear, random sub-cell shift"}}},
            {"normalizer", map.normalizer},
            {"classes", map.classes},
            {"base_scores", map.base_scores},
            {"height", map.height},
            {"width", map.width},
            {"maps", maps}};
}

}  // namespace cxr
