#include "support/torch_doctest.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cxr/core/errors.hpp"
#include "cxr/model/checkpoint.hpp"
#include "cxr/train/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace cxr;
namespace fs = std::filesystem;

namespace {

Classifier tiny_for(const std::vector<std::string>& classes, std::uint64_t seed = 3) {
    ClassifierSpec spec;
    spec.classes = classes;
    spec.backbone = "densenet-tiny";
    spec.random_init_backbone = true;
    spec.init_seed = seed;
    return build_model(spec);
}

StageConfig quick(int stage, std::size_t epochs) {
    StageConfig s = stage == 1 ? StageConfig::head_only() : StageConfig::end_to_end();
    s.batch_size = 4;
    s.max_epochs = epochs;
    s.learning_rate = 1e-2;
    s.seed = 77;
    return s;
}

std::vector<nlohmann::json> read_lines(const fs::path& file) {
    std::ifstream in(file);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

}  // namespace

TEST_CASE("stage config defaults and validation") {
    const auto s1 = StageConfig::head_only();
    CHECK(s1.learning_rate == 1e-4);
    CHECK(s1.beta1 == 0.9);
    CHECK(s1.beta2 == 0.999);
    CHECK(s1.batch_size == 16);
    CHECK(s1.max_epochs == 30);
    CHECK_FALSE(s1.backbone_trainable);
    const auto s2 = StageConfig::end_to_end();
    CHECK(s2.batch_size == 8);
    CHECK(s2.max_epochs == 10);
    CHECK(s2.backbone_trainable);
    auto bad = s1;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s1;
    bad.beta2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("class config counts the training split") {
    const auto set = testing::make_separable({6, 4, 2}, {1, 1, 1}, 8, 1);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    CHECK(cfg.weights[0].positives == 6);
    CHECK(cfg.weights[2].positives == 2);
    CHECK(cfg.weights[2].total == 12);
}

TEST_CASE("a stage logs every epoch and selects the lowest validation loss") {
    testing::TempDir dir("stage");
    const auto set = testing::make_separable({8, 8, 4}, {3, 3, 3}, 16, 2);
    auto model = tiny_for(set.classes);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    const auto result = train_stage(model, quick(1, 4), set.data(), cfg, dir.path());

    REQUIRE(result.log.epochs.size() == 4);
    std::size_t best = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(fs::exists(result.log.epochs[i].checkpoint));
        if (result.log.epochs[i].val_loss < result.log.epochs[best].val_loss) best = i;
    }
    CHECK(result.log.selected_epoch == static_cast<int>(best + 1));
    CHECK(result.log.selected_checkpoint == result.log.epochs[best].checkpoint);
    CHECK(result.best.val_loss == result.log.epochs[best].val_loss);

    std::ifstream marker(dir / "stage1/BEST");
    std::string name;
    marker >> name;
    CHECK(name == result.log.selected_checkpoint.filename().string());

    const auto lines = read_lines(dir / "stage1/train_log.jsonl");
    REQUIRE(lines.size() == 6);
    CHECK(lines.front().at("type") == "header");
    CHECK(lines.front().at("seeds").contains("sampler"));
    CHECK(lines.back().at("type") == "summary");
    CHECK(lines.back().at("selected_epoch") == result.log.selected_epoch);

    const auto reread = read_train_log(dir / "stage1/train_log.jsonl");
    CHECK(reread.selected_checkpoint == result.log.selected_checkpoint);
    CHECK(reread.epochs.size() == 4);
    CHECK(reread.epochs[1].val_loss == result.log.epochs[1].val_loss);

    // the model now holds the selected weights
    auto fresh = tiny_for(set.classes, 99);
    load_checkpoint_into(fresh, result.log.selected_checkpoint);
    const auto a = model_state(*model);
    const auto b = model_state(*fresh);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(torch::equal(a[i].second, b[i].second));
}

TEST_CASE("training is reproducible under a fixed seed") {
    const auto set = testing::make_separable({8, 8, 4}, {2, 2, 2}, 16, 5);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    testing::TempDir d1("rep1"), d2("rep2");
    auto m1 = tiny_for(set.classes, 8);
    auto m2 = tiny_for(set.classes, 8);
    const auto r1 = train_stage(m1, quick(2, 2), set.data(), cfg, d1.path());
    const auto r2 = train_stage(m2, quick(2, 2), set.data(), cfg, d2.path());
    for (std::size_t e = 0; e < 2; ++e) {
        CHECK(r1.log.epochs[e].train_loss == r2.log.epochs[e].train_loss);
        CHECK(r1.log.epochs[e].val_loss == r2.log.epochs[e].val_loss);
    }
}

TEST_CASE("a non-finite loss aborts with the offending images") {
    testing::TempDir dir("nan");
    auto set = testing::make_separable({4, 4, 2}, {1, 1, 1}, 8, 6);
    auto& poisoned = (*set.images)[set.train.front().image_path.string()];
    std::fill(poisoned.data.begin(), poisoned.data.end(), NAN);
    auto model = tiny_for(set.classes);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    auto stage = quick(2, 3);
    stage.batch_size = 5;
    try {
        train_stage(model, stage, set.data(), cfg, dir.path());
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find(set.train.front().image_path.string()) != std::string::npos);
        CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("training refuses an empty validation set") {
    testing::TempDir dir("empty");
    const auto set = testing::make_separable({4, 4, 2}, {0, 0, 0}, 8, 6);
    auto model = tiny_for(set.classes);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    CHECK_THROWS_AS(train_stage(model, quick(1, 1), set.data(), cfg, dir.path()), TrainingError);
}

TEST_CASE("the full protocol starts stage 2 from the stage-1 selection") {
    testing::TempDir dir("protocol");
    const auto set = testing::make_separable({8, 8, 4}, {2, 2, 2}, 16, 7);
    auto model = tiny_for(set.classes);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});
    const auto result = run_full_protocol(model, quick(1, 2), quick(2, 2), set.data(), cfg, dir.path());
    CHECK(fs::exists(dir / "stage1/train_log.jsonl"));
    CHECK(fs::exists(dir / "stage2/train_log.jsonl"));
    CHECK(result.final_meta.stage == 2);
    // stage 2 begins where the stage-1 selection left off
    auto start = tiny_for(set.classes, 50);
    load_checkpoint_into(start, result.stage1.selected_checkpoint);
    const double initial = evaluate_loss(start, set.val, set.source(), cfg);
    CHECK(result.stage2.initial_val_loss == doctest::Approx(initial).epsilon(1e-9));
    CHECK(result.stage2.initial_val_loss == doctest::Approx(result.stage1.best_val_loss).epsilon(1e-9));
}
