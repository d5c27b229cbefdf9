#pragma once

#include <filesystem>
#include <string>

#include "cxr/loss/class_config.hpp"
#include "cxr/model/classifier.hpp"

namespace cxr {

struct CheckpointMeta {
    int epoch = 0;
    int stage = 1;
    double val_loss = 0.0;
    std::string backbone;
    ClassConfig class_config;
    std::string pretrained_sha256;
};

/// One archive: every parameter and buffer under its module path, plus the metadata record.
/// Throws CheckpointError for a non-finite val_loss or a class list that disagrees with the head.
void save_checkpoint(const Classifier& model, const CheckpointMeta& meta, const std::filesystem::path& file);

struct LoadedCheckpoint {
    Classifier model{nullptr};
    CheckpointMeta meta;
};

/// Rebuilds the network described by the metadata and restores its state.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

/// Restores into an existing model; throws CheckpointError on any version or shape mismatch.
CheckpointMeta load_checkpoint_into(Classifier& model, const std::filesystem::path& file);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& file);

}  // namespace cxr
