#include "cxr/model/densenet.hpp"

#include <numeric>
#include <stdexcept>

namespace cxr {

namespace nn = torch::nn;

std::int64_t DenseNetOptions::feature_width() const {
    std::int64_t width = num_init_features;
    for (std::size_t i = 0; i < block_config.size(); ++i) {
        width += block_config[i] * growth_rate;
        if (i + 1 != block_config.size()) width /= 2;
    }
    return width;
}

std::int64_t DenseNetOptions::depth() const {
    // stem conv + 2 convs per dense layer + 1 conv per transition + classifier
    const auto layers = std::accumulate(block_config.begin(), block_config.end(), std::int64_t{0});
    return 1 + 2 * layers + static_cast<std::int64_t>(block_config.size()) - 1 + 1;
}

DenseNetOptions DenseNetOptions::densenet121() { return {}; }

DenseNetOptions DenseNetOptions::tiny() { return {4, {2, 2}, 8, 2}; }

DenseNetOptions DenseNetOptions::named(const std::string& name) {
    if (name == "densenet121") return densenet121();
    if (name == "densenet-tiny") return tiny();
    throw std::invalid_argument("unknown backbone '" + name + "' (expected densenet121 or densenet-tiny)");
}

DenseLayerImpl::DenseLayerImpl(std::int64_t in_features, std::int64_t growth_rate, std::int64_t bn_size) {
    norm1 = register_module("norm1", nn::BatchNorm2d(in_features));
    conv1 = register_module(
        "conv1", nn::Conv2d(nn::Conv2dOptions(in_features, bn_size * growth_rate, 1).bias(false)));
    norm2 = register_module("norm2", nn::BatchNorm2d(bn_size * growth_rate));
    conv2 = register_module(
        "conv2", nn::Conv2d(nn::Conv2dOptions(bn_size * growth_rate, growth_rate, 3).padding(1).bias(false)));
}

torch::Tensor DenseLayerImpl::forward(const torch::Tensor& x) {
    auto y = conv1(torch::relu(norm1(x)));
    return conv2(torch::relu(norm2(y)));
}

DenseBlockImpl::DenseBlockImpl(std::int64_t num_layers, std::int64_t in_features, std::int64_t growth_rate,
                               std::int64_t bn_size) {
    for (std::int64_t i = 0; i < num_layers; ++i) {
        layers_.push_back(register_module("denselayer" + std::to_string(i + 1),
                                          DenseLayer(in_features + i * growth_rate, growth_rate, bn_size)));
    }
}

torch::Tensor DenseBlockImpl::forward(torch::Tensor x) {
    for (auto& layer : layers_) x = torch::cat({x, layer->forward(x)}, 1);
    return x;
}

TransitionImpl::TransitionImpl(std::int64_t in_features, std::int64_t out_features) {
    norm = register_module("norm", nn::BatchNorm2d(in_features));
    conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in_features, out_features, 1).bias(false)));
}

torch::Tensor TransitionImpl::forward(const torch::Tensor& x) {
    return torch::avg_pool2d(conv(torch::relu(norm(x))), 2, 2);
}

DenseNetFeaturesImpl::DenseNetFeaturesImpl(const DenseNetOptions& options) {
    conv0 = register_module(
        "conv0", nn::Conv2d(nn::Conv2dOptions(3, options.num_init_features, 7).stride(2).padding(3).bias(false)));
    norm0 = register_module("norm0", nn::BatchNorm2d(options.num_init_features));
    std::int64_t width = options.num_init_features;
    for (std::size_t i = 0; i < options.block_config.size(); ++i) {
        const auto n = std::to_string(i + 1);
        blocks_.push_back(register_module(
            "denseblock" + n, DenseBlock(options.block_config[i], width, options.growth_rate, options.bn_size)));
        width += options.block_config[i] * options.growth_rate;
        if (i + 1 != options.block_config.size()) {
            transitions_.push_back(register_module("transition" + n, Transition(width, width / 2)));
            width /= 2;
        }
    }
    norm5 = register_module("norm5", nn::BatchNorm2d(width));
}

torch::Tensor DenseNetFeaturesImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(norm0(conv0(x)));
    y = torch::max_pool2d(y, 3, 2, 1);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        y = blocks_[i]->forward(y);
        if (i < transitions_.size()) y = transitions_[i]->forward(y);
    }
    return norm5(y);
}

void init_densenet_weights(torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    for (auto& m : module.modules(/*include_self=*/true)) {
        if (auto* conv = m->as<nn::Conv2d>()) {
            nn::init::kaiming_normal_(conv->weight);
        } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
            nn::init::constant_(bn->weight, 1.0);
            nn::init::constant_(bn->bias, 0.0);
        }
    }
}

}  // namespace cxr
