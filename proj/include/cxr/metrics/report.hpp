#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "cxr/metrics/metrics.hpp"

namespace cxr {

nlohmann::json report_to_json(const EvalReport& report);

/// Class-wise AUROC / sensitivity / PPV table, accuracy, mean AUROC, confusion matrix, F1 CI.
std::string format_report(const EvalReport& report);

/// One ROC curve per class on a shared axis.
void render_roc_curves(const EvalReport& report, const std::filesystem::path& png);
/// Heatmap of the confusion matrix with counts.
void render_confusion_matrix(const EvalReport& report, const std::filesystem::path& png);

/// Writes report.json, report.txt, roc_curves.png and confusion_matrix.png into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace cxr
