#include "cxr/loss/weighted_bce.hpp"

#include <stdexcept>

namespace cxr {

LossWeights LossWeights::from(const ClassConfig& config, torch::Dtype dtype) {
    std::vector<double> pos, neg;
    for (const auto& w : config.weights) {
        pos.push_back(w.pos_weight());
        neg.push_back(w.neg_weight());
    }
    const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    return {torch::tensor(pos, opts).to(dtype), torch::tensor(neg, opts).to(dtype)};
}

torch::Tensor weighted_bce_loss(const torch::Tensor& scores, const torch::Tensor& labels, const LossWeights& weights) {
    if (scores.dim() != 2) throw std::invalid_argument("scores must be B x C");
    const auto batch = scores.size(0);
    const auto num_classes = scores.size(1);
    if (labels.dim() != 1 || labels.size(0) != batch) throw std::invalid_argument("labels must hold one index per row");
    if (weights.positive.numel() != num_classes || weights.negative.numel() != num_classes)
        throw std::invalid_argument("one weight pair per class required");
    if (batch == 0) throw std::invalid_argument("empty batch");
    const auto lbl = labels.to(torch::kLong);
    if (lbl.min().item<std::int64_t>() < 0 || lbl.max().item<std::int64_t>() >= num_classes)
        throw std::invalid_argument("label index out of range for " + std::to_string(num_classes) + " classes");

    const auto p = scores.clamp(kScoreEpsilon, 1.0 - kScoreEpsilon);
    const auto onehot = torch::one_hot(lbl, num_classes).to(scores.dtype());
    const auto w_pos = weights.positive.to(scores.dtype()).unsqueeze(0);
    const auto w_neg = weights.negative.to(scores.dtype()).unsqueeze(0);
    const auto per_element = -(w_pos * onehot * torch::log(p) + w_neg * (1 - onehot) * torch::log1p(-p));
    return per_element.sum(1).mean();
}

torch::Tensor weighted_bce_loss(const torch::Tensor& scores, const torch::Tensor& labels, const ClassConfig& config) {
    return weighted_bce_loss(scores, labels, LossWeights::from(config, scores.scalar_type()));
}

}  // namespace cxr
