#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cxr/model/densenet.hpp"

namespace cxr {

struct ClassifierSpec {
    std::vector<std::string> classes;
    std::string backbone = "densenet121";
    /// Converted CheXNet archive (see tools/convert_chexnet_weights.py).
    std::filesystem::path init_weights;
    /// When non-empty, the weights file must hash to this value.
    std::string init_weights_sha256;
    /// Skip pretrained weights and initialize the backbone randomly (desk-scale runs).
    bool random_init_backbone = false;
    std::uint64_t init_seed = 0;

    std::int64_t num_classes() const { return static_cast<std::int64_t>(classes.size()); }
};

/// Dense convolutional backbone -> global average pool -> one linear layer -> per-class sigmoid.
/// The stored parameters produce logits; forward() applies the sigmoid, so scores are
/// independent per class and rows are not renormalized.
class ClassifierImpl : public torch::nn::Module {
public:
    ClassifierImpl(std::vector<std::string> classes, const std::string& backbone);

    /// B x 3 x S x S -> B x C scores in (0,1)
    torch::Tensor forward(const torch::Tensor& images);
    torch::Tensor logits(const torch::Tensor& images);
    /// Pooled backbone features, B x feature_width.
    torch::Tensor embed(const torch::Tensor& images);

    /// Frozen backbones get no gradients and stay in eval mode, so BatchNorm statistics
    /// are not updated either.
    void set_backbone_trainable(bool trainable);
    bool backbone_trainable() const { return backbone_trainable_; }

    void train(bool on = true) override;

    std::vector<torch::Tensor> backbone_parameters() const;
    std::vector<torch::Tensor> head_parameters() const;
    /// Parameters that currently receive gradients.
    std::vector<torch::Tensor> trainable_parameters() const;

    const std::vector<std::string>& classes() const { return classes_; }
    const std::string& backbone_name() const { return backbone_name_; }
    std::int64_t feature_width() const { return feature_width_; }
    std::int64_t depth() const { return depth_; }

    /// Content hash of the pretrained file the backbone came from (empty for random init).
    std::string pretrained_sha256;

private:
    std::vector<std::string> classes_;
    std::string backbone_name_;
    std::int64_t feature_width_;
    std::int64_t depth_;
    bool backbone_trainable_ = true;

public:
    DenseNetFeatures features{nullptr};
    torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(Classifier);

/// Builds the network: pretrained backbone (or seeded random init), freshly seeded head.
/// Throws CheckpointError when the weights file is absent, hashes wrong, or does not match
/// the backbone (the message lists every mismatched parameter name).
Classifier build_model(const ClassifierSpec& spec);

/// Copies every `features.*` tensor of a weights archive into the backbone.
void load_backbone_weights(Classifier& model, const std::filesystem::path& file);

/// Named parameters and buffers, the full state a checkpoint stores.
std::vector<std::pair<std::string, torch::Tensor>> model_state(const torch::nn::Module& module);

}  // namespace cxr
