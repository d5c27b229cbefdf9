#include "cxr/cli/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "cxr/core/errors.hpp"
#include "cxr/core/random.hpp"
#include "cxr/loss/class_config.hpp"

namespace fs = std::filesystem;

namespace cxr {

using nlohmann::json;

namespace {

json stage_defaults(const StageConfig& s) {
    return {{"learning_rate", s.learning_rate}, {"beta1", s.beta1},           {"beta2", s.beta2},
            {"weight_decay", s.weight_decay},   {"batch_size", s.batch_size}, {"max_epochs", s.max_epochs}};
}

/// Reports keys in `given` that have no counterpart in `schema`.
void unknown_keys(const json& given, const json& schema, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [key, value] : given.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        if (!schema.contains(key)) {
            out.push_back("unknown config key '" + path + "'");
        } else if (value.is_object() && schema.at(key).is_object()) {
            unknown_keys(value, schema.at(key), path, out);
        }
    }
}

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& section, std::vector<std::string>& errors) {
    try {
        target = j.at(key).get<T>();
    } catch (const std::exception&) {
        errors.push_back("'" + (section.empty() ? std::string() : section + ".") + key + "' has the wrong type");
    }
}

StageConfig read_stage(const json& j, int stage, std::uint64_t seed, std::vector<std::string>& errors) {
    StageConfig s = stage == 1 ? StageConfig::head_only() : StageConfig::end_to_end();
    const std::string name = "stage" + std::to_string(stage);
    read(j, "learning_rate", s.learning_rate, name, errors);
    read(j, "beta1", s.beta1, name, errors);
    read(j, "beta2", s.beta2, name, errors);
    read(j, "weight_decay", s.weight_decay, name, errors);
    read(j, "batch_size", s.batch_size, name, errors);
    read(j, "max_epochs", s.max_epochs, name, errors);
    s.seed = substream_seed(seed, name);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        errors.push_back(name + ": " + e.what());
    }
    return s;
}

}  // namespace

json default_config_json() {
    return {
        {"seed", 0},
        {"class_mode", "four_class"},
        {"output_dir", "runs/default"},
        {"data",
         {{"covid_root", ""},
          {"covid_metadata", ""},
          {"pneumonia_root", ""},
          {"manifest", ""},
          {"test_fraction", 0.2},
          {"val_count", 10}}},
        {"preprocess", {{"image_size", 224}, {"horizontal_flip_probability", 0.5}}},
        {"model",
         {{"backbone", "densenet121"},
          {"init_weights", ""},
          {"init_weights_sha256", ""},
          {"random_init_backbone", false}}},
        {"sampling", {{"ratio", ""}}},
        {"stage1", stage_defaults(StageConfig::head_only())},
        {"stage2", stage_defaults(StageConfig::end_to_end())},
        {"metrics", {{"bootstrap_resamples", 100}, {"bootstrap_size", 100}}},
        {"saliency",
         {{"num_masks", 1000}, {"grid", 7}, {"keep_probability", 0.5}, {"batch_size", 16}, {"all_classes", false}}},
    };
}

RunConfig run_config_from_json(const json& merged) {
    std::vector<std::string> errors;
    unknown_keys(merged, default_config_json(), "", errors);

    RunConfig c;
    c.effective = merged;
    read(merged, "seed", c.seed, "", errors);

    std::string mode;
    read(merged, "class_mode", mode, "", errors);
    if (auto m = parse_class_mode(mode)) c.class_mode = *m;
    else errors.push_back("class_mode must be four_class or three_class, got '" + mode + "'");

    std::string out;
    read(merged, "output_dir", out, "", errors);
    c.output_dir = out;
    if (out.empty()) errors.push_back("output_dir must not be empty");

    const auto& data = merged.at("data");
    std::string covid_root, covid_meta, pneumonia_root, manifest;
    read(data, "covid_root", covid_root, "data", errors);
    read(data, "covid_metadata", covid_meta, "data", errors);
    read(data, "pneumonia_root", pneumonia_root, "data", errors);
    read(data, "manifest", manifest, "data", errors);
    c.covid_root = covid_root;
    c.covid_metadata = covid_meta;
    c.pneumonia_root = pneumonia_root;
    c.manifest = manifest.empty() ? c.output_dir / "manifest.tsv" : fs::path(manifest);
    read(data, "test_fraction", c.split.test_fraction, "data", errors);
    read(data, "val_count", c.split.val_count, "data", errors);
    if (!(c.split.test_fraction > 0.0 && c.split.test_fraction < 1.0))
        errors.push_back("data.test_fraction must lie in (0, 1)");
    c.split.seed = substream_seed(c.seed, "split");

    const auto& pre = merged.at("preprocess");
    read(pre, "image_size", c.preprocess.target_size, "preprocess", errors);
    read(pre, "horizontal_flip_probability", c.preprocess.horizontal_flip_probability, "preprocess", errors);
    if (c.preprocess.target_size <= 0) errors.push_back("preprocess.image_size must be positive");
    if (c.preprocess.horizontal_flip_probability < 0.0 || c.preprocess.horizontal_flip_probability > 1.0)
        errors.push_back("preprocess.horizontal_flip_probability must lie in [0, 1]");

    const auto& model = merged.at("model");
    std::string weights;
    read(model, "backbone", c.model.backbone, "model", errors);
    read(model, "init_weights", weights, "model", errors);
    read(model, "init_weights_sha256", c.model.init_weights_sha256, "model", errors);
    read(model, "random_init_backbone", c.model.random_init_backbone, "model", errors);
    c.model.init_weights = weights;
    c.model.classes = c.classes();
    c.model.init_seed = substream_seed(c.seed, "init");
    try {
        (void)DenseNetOptions::named(c.model.backbone);
    } catch (const std::invalid_argument& e) {
        errors.push_back(std::string("model.backbone: ") + e.what());
    }

    std::string ratio;
    read(merged.at("sampling"), "ratio", ratio, "sampling", errors);
    try {
        c.sampling_ratio = ratio.empty() ? default_sampling_ratio(c.class_mode) : parse_ratio(ratio);
        if (c.sampling_ratio.size() != c.classes().size())
            errors.push_back("sampling.ratio has " + std::to_string(c.sampling_ratio.size()) + " entries but " +
                             to_string(c.class_mode) + " has " + std::to_string(c.classes().size()) + " classes");
    } catch (const std::invalid_argument& e) {
        errors.push_back(std::string("sampling.ratio: ") + e.what());
    }

    c.stage1 = read_stage(merged.at("stage1"), 1, c.seed, errors);
    c.stage2 = read_stage(merged.at("stage2"), 2, c.seed, errors);

    const auto& metrics = merged.at("metrics");
    read(metrics, "bootstrap_resamples", c.bootstrap_resamples, "metrics", errors);
    read(metrics, "bootstrap_size", c.bootstrap_size, "metrics", errors);
    if (c.bootstrap_resamples < 1 || c.bootstrap_size < 1) errors.push_back("bootstrap knobs must be >= 1");

    const auto& sal = merged.at("saliency");
    read(sal, "num_masks", c.saliency.num_masks, "saliency", errors);
    read(sal, "grid", c.saliency.grid, "saliency", errors);
    read(sal, "keep_probability", c.saliency.keep_probability, "saliency", errors);
    read(sal, "batch_size", c.saliency_batch_size, "saliency", errors);
    read(sal, "all_classes", c.saliency_all_classes, "saliency", errors);
    c.saliency.height = c.saliency.width = c.preprocess.target_size;
    c.saliency.seed = substream_seed(c.seed, "saliency");
    try {
        c.saliency.validate();
    } catch (const std::invalid_argument& e) {
        errors.push_back(std::string("saliency: ") + e.what());
    }

    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

RunConfig load_run_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    json merged = default_config_json();
    std::vector<std::string> errors;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot read config file " + file->string());
        try {
            const auto user = json::parse(in);
            if (!user.is_object()) throw ConfigError("config file must hold a JSON object");
            merged.merge_patch(user);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + file->string() + " is not valid JSON: " + e.what());
        }
    }
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) merged["output_dir"] = env;
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            errors.push_back("override '" + item + "' must look like key.path=value");
            continue;
        }
        std::string pointer = "/" + item.substr(0, eq);
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        merged[json::json_pointer(pointer)] = parse_override_value(item.substr(eq + 1));
    }
    if (!errors.empty()) throw ConfigError(errors);
    try {
        return run_config_from_json(merged);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

void require_paths(const RunConfig& config, std::initializer_list<PathNeeds> needs) {
    std::vector<std::string> errors;
    auto need = [&](const fs::path& p, const std::string& key, bool dir) {
        if (p.empty()) errors.push_back(key + " is not set");
        else if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p)) errors.push_back(key + " does not exist: " + p.string());
    };
    for (auto n : needs) {
        switch (n) {
            case PathNeeds::Sources:
                need(config.covid_root, "data.covid_root", true);
                need(config.covid_metadata, "data.covid_metadata", false);
                need(config.pneumonia_root, "data.pneumonia_root", true);
                break;
            case PathNeeds::Manifest:
                need(config.manifest, "data.manifest", false);
                break;
            case PathNeeds::Weights:
                if (!config.model.random_init_backbone) need(config.model.init_weights, "model.init_weights", false);
                break;
        }
    }
    if (!errors.empty()) throw ConfigError(errors);
}

}  // namespace cxr
