#pragma once

#include <string>
#include <utility>
#include <vector>

namespace nllab::cli {

// Exit codes shared by every command: 0 success, 2 config error, 3 runtime
// numeric error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

struct RunArgs {
    std::string config_path; // empty = all defaults
    std::string out_dir;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool force = false; // reuse a non-empty output directory
    bool quiet = false;
};

// Executes one experiment; the run directory receives config.resolved,
// metrics.csv (line-buffered), omega.json, summary.json and checkpoints/.
int cmd_run(const RunArgs& args);

struct SweepArgs {
    std::string config_path;
    std::string out_dir;
    std::string axis; // eta | lambda | frequency
    std::vector<std::string> values;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool force = false;
    bool quiet = false;
};

// One run directory per value plus summary.csv (value,best_acc,last_acc).
// Per-run failures are recorded and the sweep continues.
int cmd_sweep(const SweepArgs& args);

int cmd_inspect(const std::string& run_dir);

// Long-format (series,epoch,value) CSV derived from a run's metrics.csv.
int cmd_export_plots_data(const std::string& run_dir, const std::string& out_file = "");

} // namespace nllab::cli
