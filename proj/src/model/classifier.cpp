#include "cxr/model/classifier.hpp"

#include <set>
#include <sstream>

#include "cxr/core/errors.hpp"
#include "cxr/model/tensor_archive.hpp"

namespace cxr {

ClassifierImpl::ClassifierImpl(std::vector<std::string> classes, const std::string& backbone)
    : classes_(std::move(classes)), backbone_name_(backbone) {
    if (classes_.size() < 2) throw std::invalid_argument("a classifier needs at least two classes");
    const auto options = DenseNetOptions::named(backbone);
    feature_width_ = options.feature_width();
    depth_ = options.depth();
    features = register_module("features", DenseNetFeatures(options));
    classifier = register_module("classifier",
                                 torch::nn::Linear(feature_width_, static_cast<std::int64_t>(classes_.size())));
}

torch::Tensor ClassifierImpl::embed(const torch::Tensor& images) {
    auto y = torch::relu(features->forward(images));
    return torch::adaptive_avg_pool2d(y, {1, 1}).flatten(1);
}

torch::Tensor ClassifierImpl::logits(const torch::Tensor& images) { return classifier->forward(embed(images)); }

torch::Tensor ClassifierImpl::forward(const torch::Tensor& images) { return torch::sigmoid(logits(images)); }

void ClassifierImpl::set_backbone_trainable(bool trainable) {
    backbone_trainable_ = trainable;
    for (auto& p : features->parameters()) p.set_requires_grad(trainable);
    if (!trainable) features->eval();
    else features->train(is_training());
}

void ClassifierImpl::train(bool on) {
    torch::nn::Module::train(on);
    if (!backbone_trainable_) features->eval();
}

std::vector<torch::Tensor> ClassifierImpl::backbone_parameters() const { return features->parameters(); }

std::vector<torch::Tensor> ClassifierImpl::head_parameters() const { return classifier->parameters(); }

std::vector<torch::Tensor> ClassifierImpl::trainable_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : parameters())
        if (p.requires_grad()) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, torch::Tensor>> model_state(const torch::nn::Module& module) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : module.named_parameters()) out.emplace_back(item.key(), item.value());
    for (const auto& item : module.named_buffers()) out.emplace_back(item.key(), item.value());
    return out;
}

void load_backbone_weights(Classifier& model, const std::filesystem::path& file) {
    const auto archive = read_tensor_archive(file);
    std::vector<std::string> problems;
    std::set<std::string> expected;
    torch::NoGradGuard no_grad;
    for (auto& [name, target] : model_state(*model)) {
        if (name.rfind("features.", 0) != 0) continue;
        expected.insert(name);
        const auto* source = archive.find(name);
        if (!source) {
            problems.push_back(name + " (missing)");
        } else if (source->sizes() != target.sizes()) {
            std::ostringstream msg;
            msg << name << " (file " << source->sizes() << ", model " << target.sizes() << ")";
            problems.push_back(msg.str());
        } else {
            target.copy_(source->to(target.scalar_type()));
        }
    }
    for (const auto& [name, t] : archive.tensors)
        if (name.rfind("features.", 0) == 0 && !expected.contains(name)) problems.push_back(name + " (unexpected)");
    if (!problems.empty()) {
        std::string msg = "pretrained weights " + file.string() + " do not match the " + model->backbone_name() +
                          " backbone; mismatched parameters:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw CheckpointError(msg);
    }
}

Classifier build_model(const ClassifierSpec& spec) {
    torch::manual_seed(spec.init_seed);
    Classifier model(spec.classes, spec.backbone);
    if (spec.random_init_backbone) {
        init_densenet_weights(*model->features);
    } else {
        if (spec.init_weights.empty() || !std::filesystem::is_regular_file(spec.init_weights)) {
            throw CheckpointError(
                "pretrained backbone weights not found at '" + spec.init_weights.string() +
                "'. Download the CheXNet checkpoint and convert it with tools/convert_chexnet_weights.py "
                "(see README), or set model.random_init_backbone for a smoke run.");
        }
        const auto digest = sha256_file(spec.init_weights);
        if (!spec.init_weights_sha256.empty() && digest != spec.init_weights_sha256)
            throw CheckpointError("pretrained weights hash " + digest + " does not match the expected " +
                                  spec.init_weights_sha256);
        load_backbone_weights(model, spec.init_weights);
        model->pretrained_sha256 = digest;
    }
    return model;
}

}  // namespace cxr
