#include "nllab/cli.hpp"
#include "nllab/errors.hpp"
#include "nllab/kernels.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace {

// "--set key=value" pairs into (key, value).
std::vector<std::pair<std::string, std::string>> split_overrides(
    const std::vector<std::string>& raw) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& item : raw) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw nllab::ConfigError(item, "--set expects key=value, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop label correction lab for learning with noisy labels"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, run_dir, out_file;
    std::vector<std::string> set_args, values;
    bool force = false, quiet = false;

    CLI::App* run = app.add_subcommand("run", "execute one experiment");
    run->add_option("--config", config_path, "flat key = value config file");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--set", set_args, "override config keys (key=value)");
    run->add_flag("--force", force, "reuse a non-empty output directory");
    run->add_flag("--quiet", quiet, "suppress progress output");

    CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
    sweep->add_option("--config", config_path, "flat key = value config file");
    sweep->add_option("--out", out_dir, "output directory")->required();
    sweep->add_option("--axis", axis, "eta | lambda | frequency")->required();
    sweep->add_option("--values", values, "axis values")->required();
    sweep->add_option("--set", set_args, "override config keys (key=value)");
    sweep->add_flag("--force", force, "reuse a non-empty output directory");
    sweep->add_flag("--quiet", quiet, "suppress progress output");

    CLI::App* inspect = app.add_subcommand("inspect", "summarize a finished run directory");
    inspect->add_option("--run", run_dir, "run directory")->required();

    CLI::App* export_cmd =
        app.add_subcommand("export-plots-data", "flatten metrics.csv into series,epoch,value");
    export_cmd->add_option("--run", run_dir, "run directory")->required();
    export_cmd->add_option("--out", out_file, "target csv (default: <run>/plots.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        nllab::apply_thread_cap_from_env();

        if (run->parsed()) {
            nllab::cli::RunArgs args;
            args.config_path = config_path;
            args.out_dir = out_dir;
            args.overrides = split_overrides(set_args);
            args.force = force;
            args.quiet = quiet;
            return nllab::cli::cmd_run(args);
        }
        if (sweep->parsed()) {
            nllab::cli::SweepArgs args;
            args.config_path = config_path;
            args.out_dir = out_dir;
            args.axis = axis;
            args.values = values;
            args.overrides = split_overrides(set_args);
            args.force = force;
            args.quiet = quiet;
            return nllab::cli::cmd_sweep(args);
        }
        if (inspect->parsed()) return nllab::cli::cmd_inspect(run_dir);
        if (export_cmd->parsed()) return nllab::cli::cmd_export_plots_data(run_dir, out_file);
    } catch (const nllab::ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return nllab::cli::kExitConfig;
    } catch (const nllab::NumericError& e) {
        std::cerr << "numeric error at epoch " << e.epoch() << ": " << e.what() << '\n';
        return nllab::cli::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
