#include "cxr/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "cxr/core/errors.hpp"
#include "cxr/core/random.hpp"
#include "cxr/dataset/manifest.hpp"
#include "cxr/dataset/split.hpp"
#include "cxr/metrics/bootstrap.hpp"
#include "cxr/metrics/metrics.hpp"
#include "cxr/metrics/prediction_matrix.hpp"
#include "cxr/metrics/report.hpp"
#include "cxr/model/checkpoint.hpp"
#include "cxr/saliency/overlay.hpp"
#include "cxr/saliency/rise.hpp"
#include "cxr/train/trainer.hpp"

namespace fs = std::filesystem;

namespace cxr {

namespace {

void require_nonempty_dir(const fs::path& dir, const std::string& key) {
    if (fs::is_directory(dir) && fs::directory_iterator(dir) == fs::directory_iterator())
        throw ConfigError(key + " is empty: " + dir.string());
}

std::vector<double> row_of(const torch::Tensor& scores, std::int64_t i) {
    auto row = scores[i].to(torch::kFloat64).contiguous();
    return {row.data_ptr<double>(), row.data_ptr<double>() + row.numel()};
}

torch::Tensor score_batch(Classifier& model, const std::vector<ImageTensor>& images) {
    torch::NoGradGuard no_grad;
    model->eval();
    return model->forward(stack_images(images));
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + file.string());
}

/// File name safe for class names such as "COVID19".
std::string overlay_name(const std::string& cls) { return "overlay_" + cls + ".png"; }

}  // namespace

void write_effective_config(const RunConfig& config) {
    fs::create_directories(config.output_dir);
    write_text(config.output_dir / "effective_config.json", config.effective.dump(2) + "\n");
}

int cmd_prepare_data(const RunConfig& config, std::ostream& out) {
    require_paths(config, {PathNeeds::Sources});
    require_nonempty_dir(config.covid_root, "data.covid_root");
    require_nonempty_dir(config.pneumonia_root, "data.pneumonia_root");

    auto ingest = build_manifest({config.covid_root, config.covid_metadata}, {config.pneumonia_root},
                                 config.class_mode);
    auto manifest = split_by_patient(ingest.manifest, config.split);

    fs::create_directories(config.output_dir);
    if (config.manifest.has_parent_path()) fs::create_directories(config.manifest.parent_path());
    save_manifest(config.manifest, manifest);
    {
        std::ofstream rejects(config.output_dir / "rejects.tsv");
        write_rejects(rejects, ingest.rejects);
    }
    const auto table = format_split_table(manifest);
    write_text(config.output_dir / "split_summary.txt", table);
    out << table << "manifest: " << config.manifest.string() << " (" << manifest.records.size() << " images, "
        << ingest.rejects.size() << " rejected)\n";
    return kExitOk;
}

int cmd_train(const RunConfig& config, std::optional<int> stage, std::ostream& out) {
    if (stage && *stage != 1 && *stage != 2) throw ConfigError("--stage must be 1 or 2");
    require_paths(config, {PathNeeds::Manifest, PathNeeds::Weights});

    const auto manifest = load_manifest(config.manifest, config.classes());
    TrainingData data{manifest.records_in(Split::Train), manifest.records_in(Split::Val),
                      file_image_source(config.preprocess)};
    const auto class_config = make_class_config(config.classes(), data.train, config.sampling_ratio);
    auto model = build_model(config.model);

    fs::path final_checkpoint;
    if (!stage) {
        auto result = run_full_protocol(model, config.stage1, config.stage2, data, class_config, config.output_dir);
        final_checkpoint = result.final_checkpoint;
    } else if (*stage == 1) {
        final_checkpoint = train_stage(model, config.stage1, data, class_config, config.output_dir).log.selected_checkpoint;
    } else {
        const auto log_file = config.output_dir / "stage1" / "train_log.jsonl";
        if (!fs::exists(log_file)) throw ConfigError("stage 2 needs a finished stage 1 in " + config.output_dir.string());
        load_checkpoint_into(model, read_train_log(log_file).selected_checkpoint);
        final_checkpoint = train_stage(model, config.stage2, data, class_config, config.output_dir).log.selected_checkpoint;
    }

    const auto model_file = config.output_dir / "model.ckpt";
    fs::copy_file(final_checkpoint, model_file, fs::copy_options::overwrite_existing);
    const auto meta = read_checkpoint_meta(model_file);
    out << "selected " << final_checkpoint.string() << " (stage " << meta.stage << ", epoch " << meta.epoch
        << ", val loss " << meta.val_loss << ")\nmodel: " << model_file.string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& config, const std::optional<fs::path>& checkpoint,
                 const std::optional<fs::path>& predictions, std::ostream& out) {
    if (!checkpoint && !predictions) throw ConfigError("evaluate needs --checkpoint or --predictions");
    const auto dir = config.output_dir / "evaluate";
    fs::create_directories(dir);

    PredictionMatrix pred;
    if (predictions) {
        pred = load_predictions(*predictions);
    } else {
        require_paths(config, {PathNeeds::Manifest});
        if (!fs::is_regular_file(*checkpoint)) throw ConfigError("checkpoint does not exist: " + checkpoint->string());
        auto loaded = load_checkpoint(*checkpoint);
        if (loaded.model->classes() != config.classes())
            throw ConfigError("checkpoint classes do not match class_mode " + to_string(config.class_mode));
        const auto test = load_manifest(config.manifest, config.classes()).records_in(Split::Test);
        if (test.empty()) throw DataError("manifest has no test images");
        const auto scores = predict_scores(loaded.model, test, file_image_source(config.preprocess))
                                .to(torch::kFloat64)
                                .contiguous();
        pred.class_names = config.classes();
        for (const auto& r : test) {
            pred.sample_ids.push_back(r.image_path.string());
            pred.labels.push_back(r.label);
        }
        pred.scores.assign(scores.data_ptr<double>(), scores.data_ptr<double>() + scores.numel());
        save_predictions(dir / "predictions.tsv", pred);
    }

    auto report = evaluate(pred);
    report.bootstrap =
        bootstrap_f1(pred, config.bootstrap_resamples, config.bootstrap_size, substream_seed(config.seed, "bootstrap"));
    write_report(report, dir);
    out << format_report(report) << "report: " << (dir / "report.json").string() << "\n";
    return kExitOk;
}

int cmd_infer(const RunConfig& config, const fs::path& checkpoint, const std::vector<fs::path>& images,
              std::ostream& out) {
    if (!fs::is_regular_file(checkpoint)) throw ConfigError("checkpoint does not exist: " + checkpoint.string());
    auto loaded = load_checkpoint(checkpoint);
    const auto& classes = loaded.model->classes();

    std::vector<ImageTensor> inputs;
    for (const auto& path : images) inputs.push_back(load_and_preprocess(path, config.preprocess, PreprocessMode::Eval, 0));
    const auto scores = score_batch(loaded.model, inputs);

    const auto dir = config.output_dir / "infer";
    fs::create_directories(dir);
    std::ofstream tsv(dir / "scores.tsv");
    tsv << "image_path";
    for (const auto& c : classes) tsv << '\t' << c;
    tsv << "\tprediction\n";
    tsv << std::setprecision(17);
    out << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto row = row_of(scores, static_cast<std::int64_t>(i));
        const auto& predicted = classes[static_cast<std::size_t>(decide(row))];
        out << images[i].string();
        tsv << images[i].string();
        for (std::size_t c = 0; c < classes.size(); ++c) {
            out << "  " << classes[c] << '=' << row[c];
            tsv << '\t' << row[c];
        }
        out << "  -> " << predicted << '\n';
        tsv << '\t' << predicted << '\n';
    }
    return kExitOk;
}

int cmd_explain(const RunConfig& config, const fs::path& checkpoint, const std::vector<fs::path>& images,
                std::ostream& out) {
    if (!fs::is_regular_file(checkpoint)) throw ConfigError("checkpoint does not exist: " + checkpoint.string());
    auto loaded = load_checkpoint(checkpoint);
    const auto classes = loaded.model->classes();
    const auto norm = config.preprocess.normalization;

    BatchScorer scorer = [&](const std::vector<ImageTensor>& batch) {
        const auto scores = score_batch(loaded.model, batch);
        std::vector<std::vector<double>> rows;
        for (std::int64_t i = 0; i < scores.size(0); ++i) rows.push_back(row_of(scores, i));
        return rows;
    };

    for (const auto& path : images) {
        const auto intensity = load_intensity(path, config.preprocess.target_size);
        const auto input = to_normalized_tensor(intensity, norm);
        const auto map = rise_saliency(scorer, input, config.saliency, classes, norm, config.saliency_batch_size);

        const auto dir = config.output_dir / "explain" / path.stem();
        fs::create_directories(dir);
        write_text(dir / "saliency.json", saliency_to_json(map).dump() + "\n");
        const auto predicted = static_cast<std::size_t>(decide(map.base_scores));
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (c == predicted || config.saliency_all_classes) save_overlay(dir / overlay_name(classes[c]), intensity, map, c);
        }
        out << path.string() << " -> " << classes[predicted] << " (" << config.saliency.num_masks << " masks) "
            << dir.string() << "\n";
    }
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chest X-ray classifier: data preparation, training, evaluation, inference and saliency.", "cxr"};
    app.require_subcommand(1);

    std::optional<std::string> config_file;
    std::vector<std::string> overrides;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON run configuration");
        sub->add_option("--set", overrides, "Override a config key, e.g. --set stage1.max_epochs=5")->allow_extra_args(false);
        sub->add_option("--output-dir", output_dir, "Output directory (also $CXR_OUTPUT_DIR)");
        sub->add_option("--seed", seed, "Global seed");
    };

    auto* prepare = app.add_subcommand("prepare-data", "Build the patient-level split manifest");
    common(prepare);

    std::optional<int> stage;
    auto* train = app.add_subcommand("train", "Train (both stages unless --stage is given)");
    common(train);
    train->add_option("--stage", stage, "1 = head only, 2 = end to end from the stage-1 selection");

    std::optional<std::string> checkpoint, predictions;
    auto* eval = app.add_subcommand("evaluate", "Score the test split and write the metric report");
    common(eval);
    eval->add_option("--checkpoint", checkpoint, "Model checkpoint");
    eval->add_option("--predictions", predictions, "Saved predictions.tsv to re-report instead");

    std::vector<std::string> images;
    std::string model_file;
    auto* infer = app.add_subcommand("infer", "Print class scores for images");
    common(infer);
    infer->add_option("--checkpoint", model_file, "Model checkpoint")->required();
    infer->add_option("images", images, "Image files")->required();

    std::optional<std::size_t> masks;
    auto* explain = app.add_subcommand("explain", "RISE saliency maps for images");
    common(explain);
    explain->add_option("--checkpoint", model_file, "Model checkpoint")->required();
    explain->add_option("--masks", masks, "Number of random masks");
    explain->add_option("images", images, "Image files")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (output_dir) overrides.push_back("output_dir=" + nlohmann::json(*output_dir).dump());
        if (seed) overrides.push_back("seed=" + std::to_string(*seed));
        if (masks) overrides.push_back("saliency.num_masks=" + std::to_string(*masks));
        const auto config =
            load_run_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt, overrides);
        write_effective_config(config);

        std::vector<fs::path> paths(images.begin(), images.end());
        if (*prepare) return cmd_prepare_data(config, out);
        if (*train) return cmd_train(config, stage, out);
        if (*eval) {
            auto opt = [](const std::optional<std::string>& s) {
                return s ? std::optional<fs::path>(*s) : std::nullopt;
            };
            return cmd_evaluate(config, opt(checkpoint), opt(predictions), out);
        }
        if (*infer) return cmd_infer(config, model_file, paths, out);
        if (*explain) return cmd_explain(config, model_file, paths, out);
        return kExitUsage;
    } catch (const ConfigError& e) {
        for (const auto& v : e.violations()) err << "config error: " << v << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace cxr
