#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cxr/core/image_tensor.hpp"
#include "cxr/dataset/manifest.hpp"
#include "cxr/dataset/preprocess.hpp"
#include "cxr/loss/class_config.hpp"
#include "cxr/model/checkpoint.hpp"
#include "cxr/model/classifier.hpp"

namespace cxr {

struct StageConfig {
    int stage = 1;
    bool backbone_trainable = false;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    /// Reserved; off by default.
    double weight_decay = 0.0;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 30;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument listing the first violated constraint.
    void validate() const;

    /// Head only: Adam(0.9, 0.999), lr 1e-4, batch 16, 30 epochs.
    static StageConfig head_only();
    /// End to end: same optimizer, batch 8, 10 epochs.
    static StageConfig end_to_end();
};

/// Turns a record into a network input. `augment_seed` is only meaningful in train mode.
using ImageSource = std::function<ImageTensor(const ImageRecord&, PreprocessMode, std::uint64_t augment_seed)>;

/// Source backed by files on disk through load_and_preprocess.
ImageSource file_image_source(PreprocessSpec spec);

struct TrainingData {
    std::vector<ImageRecord> train;
    std::vector<ImageRecord> val;
    ImageSource source;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::filesystem::path checkpoint;
};

struct TrainLog {
    int stage = 0;
    std::map<std::string, std::uint64_t> seeds;
    /// Validation loss of the incoming weights, before any update of this stage.
    double initial_val_loss = 0.0;
    std::vector<EpochRecord> epochs;
    std::filesystem::path selected_checkpoint;
    int selected_epoch = 0;
    double best_val_loss = 0.0;
};

struct StageResult {
    TrainLog log;
    CheckpointMeta best;
};

/// Class weights from raw training counts plus the sampling ratio.
ClassConfig make_class_config(const std::vector<std::string>& classes, const std::vector<ImageRecord>& train,
                              std::vector<int> sampling_ratio);

/// Stacks preprocessed images into a B x 3 x S x S float tensor.
torch::Tensor stack_images(const std::vector<ImageTensor>& images);

/// Eval-mode scores, N x C, in record order.
torch::Tensor predict_scores(Classifier& model, std::span<const ImageRecord> records, const ImageSource& source,
                             std::size_t batch_size = 16);

/// Mean weighted BCE over every record (no sampling), eval mode.
double evaluate_loss(Classifier& model, std::span<const ImageRecord> records, const ImageSource& source,
                     const ClassConfig& config, std::size_t batch_size = 16);

/// Runs one training stage.
///
/// Batches come from the class-ratio composer in groups of lcm(ratio sum, batch_size)
/// images, each split into optimizer steps of batch_size. After every epoch the full
/// validation set is scored and a checkpoint written to out_dir/stageN/. The checkpoint with
/// the lowest validation loss (earliest on ties) is selected and loaded back into `model`.
///
/// Throws TrainingError on a non-finite loss (naming the batch) or an empty validation set.
StageResult train_stage(Classifier& model, const StageConfig& stage, const TrainingData& data,
                        const ClassConfig& class_config, const std::filesystem::path& out_dir);

struct ProtocolResult {
    TrainLog stage1;
    TrainLog stage2;
    CheckpointMeta final_meta;
    std::filesystem::path final_checkpoint;
};

/// Head-only stage, then end-to-end starting from the stage-1 selected checkpoint.
ProtocolResult run_full_protocol(Classifier& model, const StageConfig& stage1, const StageConfig& stage2,
                                 const TrainingData& data, const ClassConfig& class_config,
                                 const std::filesystem::path& out_dir);

/// Reads a train_log.jsonl back (used to resume stage 2 from a finished stage 1).
TrainLog read_train_log(const std::filesystem::path& file);

}  // namespace cxr
