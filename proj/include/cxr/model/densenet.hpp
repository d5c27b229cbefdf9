#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace cxr {

struct DenseNetOptions {
    std::int64_t growth_rate = 32;
    std::vector<std::int64_t> block_config{6, 12, 24, 16};
    std::int64_t num_init_features = 64;
    std::int64_t bn_size = 4;

    /// Channels leaving the last dense block.
    std::int64_t feature_width() const;
    /// Convolution + fully connected layers, counted the usual way (121 for densenet121).
    std::int64_t depth() const;

    static DenseNetOptions densenet121();
    /// Two small blocks; used for desk-scale tests and smoke runs.
    static DenseNetOptions tiny();
    /// "densenet121" or "densenet-tiny"; throws std::invalid_argument otherwise.
    static DenseNetOptions named(const std::string& name);
};

class DenseLayerImpl : public torch::nn::Module {
public:
    DenseLayerImpl(std::int64_t in_features, std::int64_t growth_rate, std::int64_t bn_size);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::BatchNorm2d norm1{nullptr}, norm2{nullptr};
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(DenseLayer);

class DenseBlockImpl : public torch::nn::Module {
public:
    DenseBlockImpl(std::int64_t num_layers, std::int64_t in_features, std::int64_t growth_rate, std::int64_t bn_size);
    torch::Tensor forward(torch::Tensor x);

private:
    std::vector<DenseLayer> layers_;
};
TORCH_MODULE(DenseBlock);

class TransitionImpl : public torch::nn::Module {
public:
    TransitionImpl(std::int64_t in_features, std::int64_t out_features);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::BatchNorm2d norm{nullptr};
    torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Transition);

/// Convolutional trunk. Submodule names follow torchvision (conv0, norm0, denseblockN,
/// transitionN, norm5), so converted CheXNet weights load by name.
class DenseNetFeaturesImpl : public torch::nn::Module {
public:
    explicit DenseNetFeaturesImpl(const DenseNetOptions& options);
    /// B x 3 x S x S -> B x feature_width x s x s (after the final norm, before ReLU)
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv0{nullptr};
    torch::nn::BatchNorm2d norm0{nullptr};
    std::vector<DenseBlock> blocks_;
    std::vector<Transition> transitions_;
    torch::nn::BatchNorm2d norm5{nullptr};
};
TORCH_MODULE(DenseNetFeatures);

/// Kaiming-normal convolutions, unit BatchNorm, as torchvision initializes DenseNet.
void init_densenet_weights(torch::nn::Module& module);

}  // namespace cxr
