#pragma once

#include <torch/torch.h>

#include "cxr/loss/class_config.hpp"

namespace cxr {

/// Scores are clamped to [kScoreEpsilon, 1 - kScoreEpsilon] before taking logs.
inline constexpr double kScoreEpsilon = 1e-7;

/// Per-class weight vectors (w+, w-) as 1-D tensors of length C.
struct LossWeights {
    torch::Tensor positive;
    torch::Tensor negative;

    static LossWeights from(const ClassConfig& config, torch::Dtype dtype = torch::kFloat32);
};

/// Class-weighted binary cross-entropy over sigmoid scores:
///   mean_b sum_c [ -w+_c 1{y_b=c} log p_bc - w-_c 1{y_b!=c} log(1 - p_bc) ]
/// `scores` is B x C in (0,1), `labels` holds B class indices. Throws std::invalid_argument
/// for a label >= C or mismatched shapes.
torch::Tensor weighted_bce_loss(const torch::Tensor& scores, const torch::Tensor& labels, const LossWeights& weights);

torch::Tensor weighted_bce_loss(const torch::Tensor& scores, const torch::Tensor& labels, const ClassConfig& config);

}  // namespace cxr
