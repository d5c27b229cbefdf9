#include "cxr/model/checkpoint.hpp"

#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cxr/core/errors.hpp"
#include "cxr/model/tensor_archive.hpp"

namespace cxr {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "cxr-checkpoint";
constexpr const char* kVersion = "1";

std::string exact(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string get(const std::map<std::string, std::string>& meta, const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
    return it->second;
}

CheckpointMeta decode_meta(const std::map<std::string, std::string>& meta, const std::filesystem::path& file) {
    if (meta.count("format") == 0 || meta.at("format") != kFormat)
        throw CheckpointError(file.string() + " is not a classifier checkpoint");
    if (get(meta, "version") != kVersion)
        throw CheckpointError(file.string() + ": unsupported checkpoint version " + meta.at("version"));
    CheckpointMeta m;
    try {
        m.epoch = std::stoi(get(meta, "epoch"));
        m.stage = std::stoi(get(meta, "stage"));
        m.val_loss = std::stod(get(meta, "val_loss"));
        m.backbone = get(meta, "backbone");
        m.pretrained_sha256 = meta.count("pretrained_sha256") ? meta.at("pretrained_sha256") : "";
        m.class_config.classes = json::parse(get(meta, "classes")).get<std::vector<std::string>>();
        for (const auto& w : json::parse(get(meta, "class_weights")))
            m.class_config.weights.push_back({w.at(0).get<std::int64_t>(), w.at(1).get<std::int64_t>()});
        m.class_config.sampling_ratio = json::parse(get(meta, "sampling_ratio")).get<std::vector<int>>();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(file.string() + ": malformed checkpoint metadata: " + e.what());
    }
    return m;
}

}  // namespace

void save_checkpoint(const Classifier& model, const CheckpointMeta& meta, const std::filesystem::path& file) {
    if (!std::isfinite(meta.val_loss)) throw CheckpointError("refusing to save a checkpoint with non-finite val_loss");
    if (meta.class_config.classes != model->classes())
        throw CheckpointError("checkpoint class list does not match the model head");

    TensorArchive archive;
    archive.tensors = model_state(*model);
    json weights = json::array();
    for (const auto& w : meta.class_config.weights) weights.push_back({w.positives, w.total});
    archive.metadata = {
        {"format", kFormat},
        {"version", kVersion},
        {"epoch", std::to_string(meta.epoch)},
        {"stage", std::to_string(meta.stage)},
        {"val_loss", exact(meta.val_loss)},
        {"backbone", model->backbone_name()},
        {"classes", json(model->classes()).dump()},
        {"class_weights", weights.dump()},
        {"sampling_ratio", json(meta.class_config.sampling_ratio).dump()},
        {"pretrained_sha256", meta.pretrained_sha256},
    };
    write_tensor_archive(file, archive);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& file) {
    return decode_meta(read_tensor_archive(file).metadata, file);
}

CheckpointMeta load_checkpoint_into(Classifier& model, const std::filesystem::path& file) {
    const auto archive = read_tensor_archive(file);
    auto meta = decode_meta(archive.metadata, file);
    if (meta.backbone != model->backbone_name())
        throw CheckpointError(file.string() + " holds a " + meta.backbone + " backbone, model is " +
                              model->backbone_name());
    if (meta.class_config.classes.size() != model->classes().size())
        throw CheckpointError(file.string() + " has a " + std::to_string(meta.class_config.classes.size()) +
                              "-class head, model expects " + std::to_string(model->classes().size()));

    std::vector<std::string> problems;
    auto state = model_state(*model);
    for (auto& [name, target] : state) {
        const auto* source = archive.find(name);
        if (!source) problems.push_back(name + " (missing)");
        else if (source->sizes() != target.sizes()) problems.push_back(name + " (shape)");
    }
    if (archive.tensors.size() != state.size()) problems.push_back("tensor count differs");
    if (!problems.empty()) {
        std::string msg = file.string() + " does not match the model:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw CheckpointError(msg);
    }
    torch::NoGradGuard no_grad;
    for (auto& [name, target] : state) target.copy_(archive.find(name)->to(target.scalar_type()));
    model->pretrained_sha256 = meta.pretrained_sha256;
    return meta;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file) {
    const auto meta = read_checkpoint_meta(file);
    LoadedCheckpoint loaded;
    try {
        loaded.model = Classifier(meta.class_config.classes, meta.backbone);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(file.string() + ": " + e.what());
    }
    loaded.meta = load_checkpoint_into(loaded.model, file);
    loaded.model->eval();
    return loaded;
}

}  // namespace cxr
