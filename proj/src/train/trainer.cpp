#include "cxr/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cxr/core/errors.hpp"
#include "cxr/core/random.hpp"
#include "cxr/loss/batch_sampler.hpp"
#include "cxr/loss/weighted_bce.hpp"

namespace fs = std::filesystem;

namespace cxr {

using nlohmann::json;

void StageConfig::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
    if (stage == 1 && backbone_trainable) throw std::invalid_argument("stage 1 trains the head only");
    if (stage == 2 && !backbone_trainable) throw std::invalid_argument("stage 2 trains the whole network");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in (0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (max_epochs == 0) throw std::invalid_argument("max_epochs must be positive");
}

StageConfig StageConfig::head_only() { return StageConfig{}; }

StageConfig StageConfig::end_to_end() {
    StageConfig s;
    s.stage = 2;
    s.backbone_trainable = true;
    s.batch_size = 8;
    s.max_epochs = 10;
    return s;
}

ImageSource file_image_source(PreprocessSpec spec) {
    return [spec](const ImageRecord& r, PreprocessMode mode, std::uint64_t seed) {
        return load_and_preprocess(r.image_path, spec, mode, seed);
    };
}

ClassConfig make_class_config(const std::vector<std::string>& classes, const std::vector<ImageRecord>& train,
                              std::vector<int> sampling_ratio) {
    std::vector<std::int64_t> positives(classes.size(), 0);
    for (const auto& r : train) ++positives.at(static_cast<std::size_t>(r.label));
    ClassConfig config;
    config.classes = classes;
    config.weights = compute_class_weights(positives);
    config.sampling_ratio = std::move(sampling_ratio);
    config.validate();
    return config;
}

torch::Tensor stack_images(const std::vector<ImageTensor>& images) {
    if (images.empty()) throw std::invalid_argument("no images to stack");
    const auto& first = images.front();
    auto out = torch::empty({static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width});
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (img.channels != first.channels || img.height != first.height || img.width != first.width)
            throw std::invalid_argument("images in a batch must share one shape");
        std::memcpy(out[static_cast<std::int64_t>(i)].data_ptr<float>(), img.data.data(), img.data.size() * sizeof(float));
    }
    return out;
}

namespace {

torch::Tensor labels_of(std::span<const ImageRecord> records) {
    std::vector<std::int64_t> labels;
    for (const auto& r : records) labels.push_back(r.label);
    return torch::tensor(labels, torch::kLong);
}

template <typename Fn>
void for_each_chunk(std::span<const ImageRecord> records, std::size_t batch_size, Fn&& fn) {
    for (std::size_t start = 0; start < records.size(); start += batch_size)
        fn(records.subspan(start, std::min(batch_size, records.size() - start)));
}

struct ModeGuard {
    Classifier& model;
    bool was_training;
    explicit ModeGuard(Classifier& m) : model(m), was_training(m->is_training()) {}
    ~ModeGuard() { model->train(was_training); }
};

json stage_json(const StageConfig& s) {
    return {{"stage", s.stage},           {"backbone_trainable", s.backbone_trainable},
            {"learning_rate", s.learning_rate}, {"beta1", s.beta1},
            {"beta2", s.beta2},           {"weight_decay", s.weight_decay},
            {"batch_size", s.batch_size}, {"max_epochs", s.max_epochs},
            {"seed", s.seed}};
}

}  // namespace

torch::Tensor predict_scores(Classifier& model, std::span<const ImageRecord> records, const ImageSource& source,
                             std::size_t batch_size) {
    ModeGuard guard(model);
    model->eval();
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> parts;
    for_each_chunk(records, batch_size, [&](std::span<const ImageRecord> chunk) {
        std::vector<ImageTensor> images;
        for (const auto& r : chunk) images.push_back(source(r, PreprocessMode::Eval, 0));
        parts.push_back(model->forward(stack_images(images).to(model->classifier->weight.scalar_type())));
    });
    if (parts.empty()) return torch::empty({0, static_cast<std::int64_t>(model->classes().size())});
    return torch::cat(parts, 0);
}

double evaluate_loss(Classifier& model, std::span<const ImageRecord> records, const ImageSource& source,
                     const ClassConfig& config, std::size_t batch_size) {
    if (records.empty()) throw TrainingError("validation set is empty");
    const auto scores = predict_scores(model, records, source, batch_size);
    const auto weights = LossWeights::from(config, scores.scalar_type());
    double total = 0.0;
    for_each_chunk(records, batch_size, [&, offset = std::int64_t{0}](std::span<const ImageRecord> chunk) mutable {
        const auto n = static_cast<std::int64_t>(chunk.size());
        const auto loss = weighted_bce_loss(scores.slice(0, offset, offset + n), labels_of(chunk), weights);
        total += loss.item<double>() * static_cast<double>(n);
        offset += n;
    });
    return total / static_cast<double>(records.size());
}

StageResult train_stage(Classifier& model, const StageConfig& stage, const TrainingData& data,
                        const ClassConfig& class_config, const fs::path& out_dir) {
    stage.validate();
    class_config.validate();
    if (class_config.classes != model->classes()) throw TrainingError("class config does not match the model head");
    if (data.val.empty()) throw TrainingError("validation set is empty");
    if (data.train.empty()) throw TrainingError("training set is empty");

    const fs::path stage_dir = out_dir / ("stage" + std::to_string(stage.stage));
    fs::create_directories(stage_dir);

    model->set_backbone_trainable(stage.backbone_trainable);
    const auto dtype = model->classifier->weight.scalar_type();

    const std::size_t ratio_sum = std::accumulate(class_config.sampling_ratio.begin(),
                                                  class_config.sampling_ratio.end(), std::size_t{0});
    const std::size_t group_size = std::lcm(ratio_sum, stage.batch_size);
    std::vector<int> train_labels;
    for (const auto& r : data.train) train_labels.push_back(r.label);

    TrainLog log;
    log.stage = stage.stage;
    log.seeds = {{"stage", stage.seed},
                 {"sampler", substream_seed(stage.seed, "sampler")},
                 {"augment", substream_seed(stage.seed, "augment")}};
    BatchComposer composer(train_labels, make_batch_plan(class_config.sampling_ratio, group_size),
                           log.seeds.at("sampler"));

    auto params = model->trainable_parameters();
    torch::optim::Adam optimizer(params, torch::optim::AdamOptions(stage.learning_rate)
                                             .betas({stage.beta1, stage.beta2})
                                             .weight_decay(stage.weight_decay));
    const auto weights = LossWeights::from(class_config, dtype);

    log.initial_val_loss = evaluate_loss(model, data.val, data.source, class_config);

    std::ofstream log_out(stage_dir / "train_log.jsonl", std::ios::trunc);
    log_out << json{{"type", "header"},
                    {"stage", stage.stage},
                    {"seeds", log.seeds},
                    {"config", stage_json(stage)},
                    {"group_size", group_size},
                    {"batches_per_epoch", composer.batches_per_epoch()},
                    {"initial_val_loss", log.initial_val_loss}}
                   .dump()
            << '\n'
            << std::flush;

    CheckpointMeta best_meta;
    bool have_best = false;
    for (std::size_t epoch = 1; epoch <= stage.max_epochs; ++epoch) {
        model->train();
        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t step = 0;
        const auto groups = composer.epoch(epoch - 1);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::size_t start = 0; start < groups[g].size(); start += stage.batch_size, ++step) {
                const auto end = std::min(start + stage.batch_size, groups[g].size());
                std::vector<ImageTensor> images;
                std::vector<std::int64_t> labels;
                for (std::size_t k = start; k < end; ++k) {
                    const auto idx = groups[g][k];
                    const auto aug = substream_seed(log.seeds.at("augment"), "image",
                                                    (static_cast<std::uint64_t>(epoch) << 40) ^ (g * group_size + k));
                    images.push_back(data.source(data.train[idx], PreprocessMode::Train, aug));
                    labels.push_back(data.train[idx].label);
                }
                const auto x = stack_images(images).to(dtype);
                const auto y = torch::tensor(labels, torch::kLong);
                optimizer.zero_grad();
                const auto loss = weighted_bce_loss(model->forward(x), y, weights);
                const double value = loss.item<double>();
                if (!std::isfinite(value)) {
                    std::ostringstream msg;
                    msg << "non-finite loss in stage " << stage.stage << ", epoch " << epoch << ", batch " << step
                        << "; images:";
                    for (std::size_t k = start; k < end; ++k) msg << ' ' << data.train[groups[g][k]].image_path.string();
                    throw TrainingError(msg.str());
                }
                loss.backward();
                optimizer.step();
                loss_sum += value * static_cast<double>(end - start);
                seen += end - start;
            }
        }

        EpochRecord rec;
        rec.epoch = static_cast<int>(epoch);
        rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        rec.val_loss = evaluate_loss(model, data.val, data.source, class_config);
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch);
        rec.checkpoint = stage_dir / name;
        CheckpointMeta meta{rec.epoch, stage.stage, rec.val_loss, model->backbone_name(), class_config,
                            model->pretrained_sha256};
        if (!std::isfinite(rec.val_loss))
            throw TrainingError("non-finite validation loss after stage " + std::to_string(stage.stage) + " epoch " +
                                std::to_string(epoch));
        save_checkpoint(model, meta, rec.checkpoint);
        log_out << json{{"type", "epoch"},
                        {"epoch", rec.epoch},
                        {"train_loss", rec.train_loss},
                        {"val_loss", rec.val_loss},
                        {"checkpoint", rec.checkpoint.string()}}
                       .dump()
                << '\n'
                << std::flush;
        if (!have_best || rec.val_loss < best_meta.val_loss) {
            best_meta = meta;
            log.selected_checkpoint = rec.checkpoint;
            have_best = true;
        }
        log.epochs.push_back(std::move(rec));
    }

    log.selected_epoch = best_meta.epoch;
    log.best_val_loss = best_meta.val_loss;
    log_out << json{{"type", "summary"},
                    {"selected_epoch", log.selected_epoch},
                    {"best_val_loss", log.best_val_loss},
                    {"selected_checkpoint", log.selected_checkpoint.string()}}
                   .dump()
            << '\n';

    {
        std::ofstream marker(stage_dir / "BEST", std::ios::trunc);
        marker << log.selected_checkpoint.filename().string() << '\n';
        std::error_code ec;
        fs::remove(stage_dir / "best.ckpt", ec);
        fs::create_symlink(log.selected_checkpoint.filename(), stage_dir / "best.ckpt", ec);
    }

    load_checkpoint_into(model, log.selected_checkpoint);
    return {std::move(log), best_meta};
}

ProtocolResult run_full_protocol(Classifier& model, const StageConfig& stage1, const StageConfig& stage2,
                                 const TrainingData& data, const ClassConfig& class_config, const fs::path& out_dir) {
    ProtocolResult result;
    auto first = train_stage(model, stage1, data, class_config, out_dir);
    result.stage1 = std::move(first.log);
    load_checkpoint_into(model, result.stage1.selected_checkpoint);
    auto second = train_stage(model, stage2, data, class_config, out_dir);
    result.stage2 = std::move(second.log);
    result.final_meta = second.best;
    result.final_checkpoint = result.stage2.selected_checkpoint;
    return result;
}

TrainLog read_train_log(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw TrainingError("cannot read training log " + file.string());
    TrainLog log;
    bool have_summary = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto rec = json::parse(line);
        const auto type = rec.at("type").get<std::string>();
        if (type == "header") {
            log.stage = rec.at("stage");
            log.seeds = rec.at("seeds").get<std::map<std::string, std::uint64_t>>();
            log.initial_val_loss = rec.at("initial_val_loss");
        } else if (type == "epoch") {
            log.epochs.push_back({rec.at("epoch"), rec.at("train_loss"), rec.at("val_loss"),
                                  rec.at("checkpoint").get<std::string>()});
        } else if (type == "summary") {
            log.selected_epoch = rec.at("selected_epoch");
            log.best_val_loss = rec.at("best_val_loss");
            log.selected_checkpoint = rec.at("selected_checkpoint").get<std::string>();
            have_summary = true;
        }
    }
    if (!have_summary) throw TrainingError(file.string() + " has no summary record; the stage did not finish");
    return log;
}

}  // namespace cxr
