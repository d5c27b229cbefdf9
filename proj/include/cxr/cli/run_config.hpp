#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/core/classes.hpp"
#include "cxr/dataset/preprocess.hpp"
#include "cxr/dataset/split.hpp"
#include "cxr/model/classifier.hpp"
#include "cxr/saliency/rise.hpp"
#include "cxr/train/trainer.hpp"

namespace cxr {

/// Environment variable that overrides `output_dir`.
inline constexpr const char* kOutputDirEnv = "CXR_OUTPUT_DIR";

struct RunConfig {
    std::uint64_t seed = 0;
    ClassMode class_mode = ClassMode::FourClass;
    std::filesystem::path output_dir;

    std::filesystem::path covid_root;
    std::filesystem::path covid_metadata;
    std::filesystem::path pneumonia_root;
    std::filesystem::path manifest;
    SplitParams split;

    PreprocessSpec preprocess;
    ClassifierSpec model;
    std::vector<int> sampling_ratio;
    StageConfig stage1;
    StageConfig stage2;

    std::size_t bootstrap_resamples = 100;
    std::size_t bootstrap_size = 100;

    MaskSpec saliency;
    std::size_t saliency_batch_size = 16;
    bool saliency_all_classes = false;

    /// Fully defaulted configuration as loaded; echoing it reproduces the run.
    nlohmann::json effective;

    std::vector<std::string> classes() const { return class_names(class_mode); }
};

/// Every key with its default value.
nlohmann::json default_config_json();

/// Layers: defaults < file < $CXR_OUTPUT_DIR < `overrides` ("dotted.key=value"; the value is
/// parsed as JSON when possible, otherwise taken as a string). Collects every violation
/// into one ConfigError. Path existence is checked separately by require_paths.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

RunConfig run_config_from_json(const nlohmann::json& merged);

enum class PathNeeds { Sources, Manifest, Weights };

/// Throws ConfigError listing every missing path needed by a command.
void require_paths(const RunConfig& config, std::initializer_list<PathNeeds> needs);

}  // namespace cxr
