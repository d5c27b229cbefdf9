#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cxr/cli/run_config.hpp"

namespace cxr {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Scans both sources, splits by patient and writes manifest.tsv, rejects.tsv and
/// split_summary.txt under the output directory.
int cmd_prepare_data(const RunConfig& config, std::ostream& out);

/// `stage` empty runs both stages; 2 resumes from the stage-1 selection on disk.
int cmd_train(const RunConfig& config, std::optional<int> stage, std::ostream& out);

/// Scores the test split with `checkpoint`, or re-reports saved `predictions`.
int cmd_evaluate(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                 const std::optional<std::filesystem::path>& predictions, std::ostream& out);

int cmd_infer(const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::vector<std::filesystem::path>& images, std::ostream& out);

int cmd_explain(const RunConfig& config, const std::filesystem::path& checkpoint,
                const std::vector<std::filesystem::path>& images, std::ostream& out);

/// Writes the fully defaulted config as output_dir/effective_config.json.
void write_effective_config(const RunConfig& config);

/// Parses argv and dispatches. Errors are reported on `err` and mapped to an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cxr
