// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cxr/core/random.hpp"
#include "cxr/dataset/manifest.hpp"
#include "cxr/dataset/split.hpp"
#include "cxr/loss/batch_sampler.hpp"
#include "cxr/loss/class_config.hpp"
#include "cxr/loss/weighted_bce.hpp"
#include "cxr/metrics/bootstrap.hpp"
#include "cxr/metrics/metrics.hpp"
#include "cxr/model/checkpoint.hpp"
#include "cxr/model/classifier.hpp"
#include "cxr/saliency/rise.hpp"
#include "cxr/train/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace cxr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

ClassConfig config_from_counts(const std::vector<std::int64_t>& counts) {
    ClassConfig cfg;
    for (std::size_t c = 0; c < counts.size(); ++c) cfg.classes.push_back("c" + std::to_string(c));
    cfg.weights = compute_class_weights(counts);
    cfg.sampling_ratio.assign(counts.size(), 1);
    return cfg;
}

Classifier small_model(const std::vector<std::string>& classes, std::uint64_t seed) {
    ClassifierSpec spec;
    spec.classes = classes;
    spec.backbone = "densenet-tiny";
    spec.random_init_backbone = true;
    spec.init_seed = seed;
    return build_model(spec);
}

// 1 ------------------------------------------------------------------------------------------
Outcome loss_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = trial % 2 ? 3 : 4;
        const std::size_t batch = 1 + rng() % 16;
        std::vector<std::int64_t> counts(classes);
        for (auto& n : counts) n = 1 + static_cast<std::int64_t>(rng() % 500);
        const auto cfg = config_from_counts(counts);
        std::vector<double> p(batch * classes);
        std::vector<std::int64_t> y(batch);
        for (auto& v : p) v = trial % 10 == 0 ? std::round(u(rng)) : u(rng);
        for (auto& v : y) v = static_cast<std::int64_t>(rng() % classes);

        double oracle = 0.0;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < classes; ++c) {
                const double s = std::min(std::max(p[b * classes + c], 1e-7), 1.0 - 1e-7);
                const double total = static_cast<double>(cfg.weights[c].total);
                if (static_cast<std::int64_t>(c) == y[b])
                    oracle += -(static_cast<double>(cfg.weights[c].negatives()) / total) * std::log(s);
                else
                    oracle += -(static_cast<double>(cfg.weights[c].positives) / total) * std::log(1.0 - s);
            }
        oracle /= static_cast<double>(batch);

        const auto scores = torch::tensor(p, torch::kFloat64).reshape({static_cast<long>(batch), static_cast<long>(classes)});
        const double got = weighted_bce_loss(scores, torch::tensor(y), LossWeights::from(cfg, torch::kFloat64)).item<double>();
        worst = std::max(worst, std::abs(got - oracle));
    }
    const auto half = torch::full({4, 2}, 0.5, torch::kFloat64);
    const double hand = weighted_bce_loss(half, torch::tensor({0, 1, 1, 0}),
                                          LossWeights::from(config_from_counts({7, 7}), torch::kFloat64))
                            .item<double>();
    const double hand_err = std::abs(hand - std::log(2.0));
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && hand_err <= 1e-9 && secs < 5.0,
            "max |loss - oracle| " + fmt("%.2e", worst) + ", |hand - ln2| " + fmt("%.2e", hand_err) + ", " +
                fmt("%.2fs", secs)};
}

// 2 ------------------------------------------------------------------------------------------
Outcome weight_formula() {
    const std::vector<std::int64_t> counts{1341, 2530, 1337, 115};
    const auto w = compute_class_weights(counts);
    const auto& covid = w.back();
    const bool pos = covid.negatives() * 5323 == 5208 * covid.total;
    const bool neg = covid.positives * 5323 == 115 * covid.total;
    bool sums = true;
    for (const auto& c : w) sums = sums && c.positives + c.negatives() == c.total;
    return {pos && neg && sums && covid.pos_weight() == 5208.0 / 5323.0 && covid.neg_weight() == 115.0 / 5323.0,
            "w+ = " + std::to_string(covid.negatives()) + "/" + std::to_string(covid.total) + ", w- = " +
                std::to_string(covid.positives) + "/" + std::to_string(covid.total)};
}

// 3 ------------------------------------------------------------------------------------------
bool sampler_case(const std::vector<std::size_t>& counts, const std::vector<int>& ratio, std::size_t batch_size,
                  std::string& detail) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
    const auto plan = make_batch_plan(ratio, batch_size);
    BatchComposer composer(labels, plan, 2024);
    const auto minority = static_cast<int>(composer.minority_class());
    std::size_t batches = 0;
    for (std::size_t e = 0; e < 3; ++e) {
        std::map<std::size_t, int> minority_uses;
        for (const auto& batch : composer.epoch(e)) {
            std::vector<std::size_t> hist(counts.size(), 0);
            for (auto i : batch) {
                ++hist[static_cast<std::size_t>(labels[i])];
                if (labels[i] == minority) ++minority_uses[i];
            }
            if (hist != plan.per_class_counts) {
                detail = "batch histogram differs from the plan";
                return false;
            }
            ++batches;
        }
        if (minority_uses.size() != counts.back()) {
            detail = "minority coverage " + std::to_string(minority_uses.size()) + "/" + std::to_string(counts.back());
            return false;
        }
        for (const auto& [i, n] : minority_uses)
            if (n != 1) {
                detail = "minority image used " + std::to_string(n) + " times";
                return false;
            }
    }
    detail += format_ratio(ratio) + " batch " + std::to_string(batch_size) + ": " + std::to_string(batches) +
              " batches match; ";
    return true;
}

Outcome sampler_exactness() {
    const auto t0 = Clock::now();
    std::string detail;
    const bool four = sampler_case({1341, 2530, 1337, 115}, {5, 5, 5, 1}, 16, detail);
    const bool three = sampler_case({1341, 3867, 115}, {7, 7, 1}, 15, detail);
    const double secs = seconds_since(t0);
    return {four && three && secs < 5.0, detail + fmt("%.2fs", secs)};
}

// 4 ------------------------------------------------------------------------------------------
Outcome patient_split() {
    std::mt19937_64 rng(404);
    std::size_t straddling = 0, off_target = 0;
    double worst_slack = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t classes = trial % 3 == 0 ? 3 : 4;
        const std::size_t patients = classes * 3 + rng() % (51 - classes * 3);
        DatasetManifest m;
        for (std::size_t c = 0; c < classes; ++c) m.classes.push_back("k" + std::to_string(c));
        for (std::size_t p = 0; p < patients; ++p) {
            const int primary = static_cast<int>(p < classes * 3 ? p % classes : rng() % classes);
            const std::size_t images = 1 + rng() % 5;
            for (std::size_t i = 0; i < images; ++i) {
                // a few patients carry images of a second class
                const int label = (i > 0 && p >= classes * 3 && rng() % 10 == 0) ? static_cast<int>(rng() % classes)
                                                                                   : primary;
                m.records.push_back({"p" + std::to_string(p) + "/" + std::to_string(i) + ".png",
                                     "patient-" + std::to_string(p), label, Split::Train});
            }
        }
        m.recount();
        SplitParams params;
        params.seed = rng();
        params.val_count = rng() % 4;
        const auto out = split_by_patient(m, params);

        std::map<std::string, std::set<Split>> seen;
        std::map<std::string, std::size_t> size;
        std::size_t test = 0;
        for (const auto& r : out.records) {
            seen[r.patient_id].insert(r.split);
            ++size[r.patient_id];
            test += r.split == Split::Test;
        }
        std::size_t biggest = 0;
        for (const auto& [id, s] : seen) {
            straddling += s.size() > 1;
            biggest = std::max(biggest, size[id]);
        }
        const double slack = std::abs(static_cast<double>(test) - 0.2 * static_cast<double>(out.records.size()));
        off_target += slack > static_cast<double>(biggest);
        worst_slack = std::max(worst_slack, slack);
    }
    return {straddling == 0 && off_target == 0,
            std::to_string(straddling) + " straddling patients, " + std::to_string(off_target) +
                " manifests off target, max |test - 0.2N| " + fmt("%.1f", worst_slack)};
}

// 5 ------------------------------------------------------------------------------------------
Outcome auroc_oracle() {
    std::mt19937_64 rng(505);
    double worst_pairs = 0.0, worst_trapz = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 199;
        const std::uint64_t levels = trial % 2 ? 10 : 1000000;
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % levels) / static_cast<double>(levels);
            y[i] = static_cast<int>(rng() % 3 == 0);
        }
        y[0] = 1;
        y[1] = 0;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (y[i] == 1 && y[j] == 0) {
                    pairs += 1.0;
                    wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
                }
        const double a = auroc(s, y);
        worst_pairs = std::max(worst_pairs, std::abs(a - wins / pairs));
        worst_trapz = std::max(worst_trapz, std::abs(a - trapezoid_area(roc_curve(s, y))));
    }
    return {worst_pairs <= 1e-9 && worst_trapz <= 1e-9,
            "max |pair - brute| " + fmt("%.1e", worst_pairs) + ", max |pair - trapezoid| " + fmt("%.1e", worst_trapz)};
}

// 6 ------------------------------------------------------------------------------------------
Outcome mean_auroc_crosscheck() {
    const std::vector<double> per_class{0.9788, 0.9798, 0.9370, 0.9994};
    const double m = mean_auroc(per_class);
    return {std::abs(m - 0.9738) <= 5e-5, "mean " + fmt("%.6f", m) + " vs reported 0.9738"};
}

// 7 ------------------------------------------------------------------------------------------
std::vector<torch::Tensor> clone_all(const std::vector<torch::Tensor>& ts) {
    std::vector<torch::Tensor> out;
    for (const auto& t : ts) out.push_back(t.detach().clone());
    return out;
}

double max_delta(const std::vector<torch::Tensor>& now, const std::vector<torch::Tensor>& before) {
    double worst = 0.0;
    for (std::size_t i = 0; i < now.size(); ++i)
        worst = std::max(worst, (now[i].detach() - before[i]).abs().max().item<double>());
    return worst;
}

std::vector<torch::Tensor> backbone_buffers(Classifier& m) {
    std::vector<torch::Tensor> out;
    for (const auto& b : m->features->buffers())
        if (b.is_floating_point()) out.push_back(b);
    return out;
}

std::size_t steps_logged(const fs::path& log) {
    std::ifstream in(log);
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    return header.at("batches_per_epoch").get<std::size_t>() * header.at("group_size").get<std::size_t>() /
           header.at("config").at("batch_size").get<std::size_t>();
}

Outcome freeze_contract() {
    testing::TempDir dir("freeze");
    // 5 minority images at 1 per step of 2 -> 5 steps in one epoch
    const auto five = testing::make_separable({6, 5}, {2, 2}, 16, 71);
    auto model = small_model(five.classes, 72);
    const auto cfg = make_class_config(five.classes, five.train, {1, 1});

    StageConfig s1 = StageConfig::head_only();
    s1.batch_size = 2;
    s1.max_epochs = 1;
    s1.learning_rate = 1e-2;
    const auto params_before = clone_all(model->backbone_parameters());
    const auto buffers_before = clone_all(backbone_buffers(model));
    const auto head_before = model->classifier->weight.detach().clone();
    train_stage(model, s1, five.data(), cfg, dir / "a");
    const auto steps1 = steps_logged(dir / "a/stage1/train_log.jsonl");
    const double frozen = max_delta(model->backbone_parameters(), params_before);
    const double stats = max_delta(backbone_buffers(model), buffers_before);
    const bool head_moved = !torch::equal(head_before, model->classifier->weight.detach());

    // one minority image -> a single step
    auto one = testing::make_separable({2, 1}, {2, 2}, 16, 73);
    StageConfig s2 = StageConfig::end_to_end();
    s2.batch_size = 2;
    s2.max_epochs = 1;
    const auto mid = clone_all(model->backbone_parameters());
    train_stage(model, s2, one.data(), make_class_config(one.classes, one.train, {1, 1}), dir / "b");
    const auto steps2 = steps_logged(dir / "b/stage2/train_log.jsonl");
    const double moved = max_delta(model->backbone_parameters(), mid);

    return {steps1 == 5 && steps2 == 1 && frozen == 0.0 && stats == 0.0 && moved > 0.0 && head_moved,
            std::to_string(steps1) + " stage-1 steps: max |d backbone param| " + fmt("%.1e", frozen) +
                ", BN stats " + fmt("%.1e", stats) + "; " + std::to_string(steps2) + " stage-2 step: " +
                fmt("%.2e", moved)};
}

// 8 ------------------------------------------------------------------------------------------
Outcome gradient_check() {
    torch::manual_seed(8);
    auto model = small_model({"a", "b", "c"}, 81);
    model->to(torch::kFloat64);
    model->eval();
    const auto x = torch::randn({4, 3, 16, 16}, torch::kFloat64);
    const auto y = torch::tensor({0, 2, 1, 2});
    const auto weights = LossWeights::from(config_from_counts({3, 5, 2}), torch::kFloat64);
    auto loss_value = [&] { return weighted_bce_loss(model->forward(x), y, weights); };

    for (auto& p : model->parameters()) p.mutable_grad() = torch::Tensor();
    loss_value().backward();

    double worst = 0.0;
    std::size_t checked = 0;
    const double h = 1e-6;
    for (auto* param : {&model->classifier->weight, &model->classifier->bias}) {
        const auto analytic = param->grad().clone().flatten();
        auto flat = param->data().view({-1});
        for (std::int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            torch::NoGradGuard guard;
            flat[i] = orig + h;
            const double up = loss_value().item<double>();
            flat[i] = orig - h;
            const double down = loss_value().item<double>();
            flat[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[i].item<double>();
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
            ++checked;
        }
    }
    return {worst <= 1e-3 && checked > 0,
            std::to_string(checked) + " head parameters, max relative error " + fmt("%.2e", worst)};
}

// 9 ------------------------------------------------------------------------------------------
bool selection_matches_log(const fs::path& log_file, std::string& detail) {
    std::ifstream in(log_file);
    std::string line;
    double best = INFINITY;
    int best_epoch = 0, selected = -1;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        if (j.at("type") == "epoch" && j.at("val_loss").get<double>() < best) {
            best = j.at("val_loss").get<double>();
            best_epoch = j.at("epoch").get<int>();
        }
        if (j.at("type") == "summary") selected = j.at("selected_epoch").get<int>();
    }
    detail += log_file.parent_path().filename().string() + " selected epoch " + std::to_string(selected) +
              " (min val loss at " + std::to_string(best_epoch) + "); ";
    return selected == best_epoch;
}

Outcome smoke() {
    const auto t0 = Clock::now();
    testing::TempDir dir("smoke");
    // 40 images: 30 train, 10 val
    const auto set = testing::make_separable({12, 12, 6}, {4, 4, 2}, 32, 91);
    auto model = small_model(set.classes, 92);
    const auto cfg = make_class_config(set.classes, set.train, {2, 2, 1});

    StageConfig s1 = StageConfig::head_only();
    s1.batch_size = 5;
    s1.learning_rate = 1e-2;
    s1.seed = 93;
    StageConfig s2 = StageConfig::end_to_end();
    s2.batch_size = 5;
    s2.learning_rate = 1e-3;
    s2.seed = 94;
    const auto result = run_full_protocol(model, s1, s2, set.data(), cfg, dir.path());

    const auto scores = predict_scores(model, set.train, set.source()).to(torch::kFloat64).contiguous();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < set.train.size(); ++i) {
        const double* row = scores.data_ptr<double>() + i * set.classes.size();
        correct += decide(std::span<const double>(row, set.classes.size())) == set.train[i].label;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(set.train.size());

    std::string detail;
    const bool sel1 = selection_matches_log(dir / "stage1/train_log.jsonl", detail);
    const bool sel2 = selection_matches_log(dir / "stage2/train_log.jsonl", detail);
    const bool final_is_stage2 = result.final_checkpoint == result.stage2.selected_checkpoint;
    const double secs = seconds_since(t0);
    return {accuracy == 1.0 && sel1 && sel2 && final_is_stage2 && secs < 120.0,
            "train accuracy " + fmt("%.3f", accuracy) + "; " + detail + fmt("%.1fs", secs)};
}

// 10 -----------------------------------------------------------------------------------------
PredictionMatrix noisy_predictions(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PredictionMatrix p;
    p.class_names = {"a", "b", "c", "d"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng() % 4);
        p.sample_ids.push_back("s" + std::to_string(i));
        p.labels.push_back(label);
        for (int c = 0; c < 4; ++c) p.scores.push_back(u(rng) * 0.6 + (c == label ? 0.3 : 0.0));
    }
    return p;
}

Outcome bootstrap_sanity() {
    const auto pred = noisy_predictions(600, 10);
    const auto a = bootstrap_f1(pred, 100, 100, 1010);
    const auto b = bootstrap_f1(pred, 100, 100, 1010);
    const bool same = a.point == b.point && a.ci_low == b.ci_low && a.ci_high == b.ci_high;

    auto perfect = pred;
    for (std::size_t i = 0; i < perfect.num_samples(); ++i)
        for (std::size_t c = 0; c < 4; ++c)
            perfect.scores[i * 4 + c] = static_cast<int>(c) == perfect.labels[i] ? 0.9 : 0.1;
    const auto p = bootstrap_f1(perfect, 100, 100, 1010);
    const bool ones = p.point == 1.0 && p.ci_low == 1.0 && p.ci_high == 1.0;

    const auto wide = bootstrap_f1(pred, 100, 400, 1010);
    const double w100 = a.ci_high - a.ci_low;
    const double w400 = wide.ci_high - wide.ci_low;
    return {same && ones && w400 < w100,
            "F1 " + fmt("%.4f", a.point) + " CI [" + fmt("%.4f", a.ci_low) + ", " + fmt("%.4f", a.ci_high) +
                "] repeated " + (same ? "identically" : "differently") + "; perfect -> " +
                fmt("(%.1f", p.point) + fmt(", %.1f", p.ci_low) + fmt(", %.1f)", p.ci_high) + "; width " +
                fmt("%.4f", w100) + " -> " + fmt("%.4f", w400)};
}

// 11 -----------------------------------------------------------------------------------------
Outcome rise_planted_region() {
    const int size = 64, y0 = 30, x0 = 12, side = 20;
    const ImageTensor image(3, size, size, 1.0f);
    BatchScorer region = [&](const std::vector<ImageTensor>& batch) {
        std::vector<std::vector<double>> rows;
        for (const auto& img : batch) {
            double s = 0.0;
            for (int y = y0; y < y0 + side; ++y)
                for (int x = x0; x < x0 + side; ++x) s += img.at(0, y, x);
            rows.push_back({s / (side * side), 0.5});
        }
        return rows;
    };

    int inside = 0;
    bool nonnegative = true;
    for (std::uint64_t run = 0; run < 100; ++run) {
        MaskSpec spec;
        spec.height = spec.width = size;
        spec.seed = substream_seed(1100, "run", run);
        const auto map = rise_saliency(region, image, spec, {"region", "flat"});
        for (const auto& m : map.maps)
            nonnegative = nonnegative && *std::min_element(m.begin(), m.end()) >= 0.0;
        const auto& m = map.maps[0];
        const auto peak = static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
        const int py = peak / size, px = peak % size;
        inside += py >= y0 && py < y0 + side && px >= x0 && px < x0 + side;
    }

    MaskSpec full;
    full.height = full.width = size;
    full.keep_probability = 1.0;
    full.num_masks = 20;
    bool unchanged = true;
    BatchScorer watch = [&](const std::vector<ImageTensor>& batch) {
        auto rows = region(batch);
        for (const auto& r : rows) unchanged = unchanged && r[0] == 1.0;
        return rows;
    };
    const auto p1 = rise_saliency(watch, image, full, {"region", "flat"});
    for (double v : p1.maps[0]) unchanged = unchanged && std::abs(v - 1.0) < 1e-12;

    return {inside >= 95 && nonnegative && unchanged,
            std::to_string(inside) + "/100 peaks inside the region; maps " +
                (nonnegative ? "nonnegative" : "NEGATIVE") + "; p=1 scores " + (unchanged ? "unchanged" : "CHANGED")};
}

}  // namespace

int main() {
    torch::set_num_threads(1);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"loss oracle", loss_oracle},
        {"class weight formula", weight_formula},
        {"sampler exactness", sampler_exactness},
        {"patient-level split", patient_split},
        {"AUROC oracle", auroc_oracle},
        {"mean AUROC cross-check", mean_auroc_crosscheck},
        {"freeze contract", freeze_contract},
        {"head gradient check", gradient_check},
        {"end-to-end smoke", smoke},
        {"bootstrap determinism", bootstrap_sanity},
        {"RISE planted region", rise_planted_region},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %2zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
