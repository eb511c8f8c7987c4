#include "nllab/cli.hpp"

#include "nllab/checkpoint.hpp"
#include "nllab/config.hpp"
#include "nllab/errors.hpp"
#include "nllab/loop.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace nllab::cli {

namespace {

constexpr const char* kMetricsHeader = "epoch,train_loss,test_acc,label_acc,metaval_risk,K\n";

void prepare_out_dir(const std::string& out_dir, bool force) {
    const fs::path dir(out_dir);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir))
            throw ConfigError("out", out_dir + " exists and is not a directory");
        if (!fs::is_empty(dir) && !force)
            throw ConfigError("out", out_dir + " is not empty (pass --force to reuse it)");
    } else {
        fs::create_directories(dir);
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string metrics_line(const EpochRecord& rec) {
    std::string line = std::to_string(rec.epoch);
    line += ',';
    line += format_double(rec.train_loss);
    line += ',';
    line += format_double(rec.test_acc);
    line += ',';
    line += format_double(rec.label_acc);
    line += ',';
    line += format_double(rec.metaval_risk);
    line += ',';
    line += std::to_string(rec.correction_count);
    line += '\n';
    return line;
}

json rounds_json(const RunResult& result) {
    json rounds = json::array();
    for (const RoundRecord& r : result.rounds) {
        json entry;
        entry["iteration"] = r.round;
        entry["epoch"] = r.epoch;
        entry["K"] = r.correction_count;
        entry["omega"] = r.omega;
        entry["achieved_risk"] = r.achieved_risk;
        entry["provenance"] = r.provenance;
        if (r.vertex_index >= 0) entry["vertex_index"] = r.vertex_index;
        entry["component_risks"] = r.component_risks;
        entry["base_refreshed"] = r.base_refreshed;
        entry["corrector_epochs"] = r.corrector_epochs;
        entry["corrector_best_val_loss"] = r.corrector_best_val_loss;
        rounds.push_back(std::move(entry));
    }
    return json{{"rounds", std::move(rounds)}};
}

json summary_json(const RunResult& result) {
    json timing;
    timing["total_s"] = result.times.total;
    timing["classifier_s"] = result.times.classifier;
    timing["evaluation_s"] = result.times.evaluation;
    timing["snapshot_s"] = result.times.snapshot;
    timing["corrector_s"] = result.times.corrector;
    timing["omega_s"] = result.times.omega;
    timing["label_update_s"] = result.times.label_update;
    timing["correction_share"] = result.times.correction_share();

    json out;
    out["best_test_acc"] = result.best_test_acc;
    out["best_epoch"] = result.best_epoch;
    out["last_test_acc"] = result.last_test_acc;
    out["initial_label_acc"] = result.initial_label_acc;
    out["final_label_acc"] = result.final_label_acc;
    out["correction_rounds"] = result.rounds.size();
    out["timing"] = std::move(timing);
    return out;
}

void save_model_checkpoint(const fs::path& path, TwoHeadModel& model) {
    std::vector<std::pair<std::string, const ParamTensor*>> tensors;
    const auto add = [&tensors](const Mlp& net, const std::string& prefix) {
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            tensors.emplace_back(prefix + ".w" + std::to_string(l), &net.weight(l));
            tensors.emplace_back(prefix + ".b" + std::to_string(l), &net.bias(l));
        }
    };
    add(model.extractor(), "extractor");
    add(model.clean_head(), "clean_head");
    add(model.noisy_head(), "noisy_head");
    save_checkpoint(path.string(), tensors);
}

// Runs one experiment into out_dir; shared by cmd_run and cmd_sweep.
RunResult execute_run(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    write_text(out_dir / "config.resolved", serialize_config(cfg));

    PreparedData data = prepare_data(cfg);
    if (cfg.export_dataset)
        export_csv((out_dir / "dataset.csv").string(), data.train.features,
                   data.train.has_truth() ? data.train.true_labels : data.train.noisy_labels,
                   &data.train.noisy_labels);

    std::ofstream metrics(out_dir / "metrics.csv");
    if (!metrics) throw std::runtime_error("cannot write metrics.csv");
    metrics << kMetricsHeader;
    metrics.flush();

    const auto on_epoch = [&metrics, quiet](const EpochRecord& rec) {
        metrics << metrics_line(rec);
        metrics.flush(); // partial files always end on a complete line
        if (!quiet && rec.epoch % 10 == 0)
            std::cout << "epoch " << rec.epoch << "  loss " << rec.train_loss << "  test_acc "
                      << rec.test_acc << '\n';
    };

    RunResult result = cfg.method == "ce"
                           ? run_baseline_ce(cfg, data.train, data.meta, data.test, on_epoch)
                           : run_algorithm1(cfg, data.train, data.meta, data.test, on_epoch);

    write_text(out_dir / "omega.json", rounds_json(result).dump(2) + "\n");
    write_text(out_dir / "summary.json", summary_json(result).dump(2) + "\n");

    fs::create_directories(out_dir / "checkpoints");
    save_model_checkpoint(out_dir / "checkpoints" / "model.ckpt", result.model);
    if (result.has_corrector)
        save_mlp((out_dir / "checkpoints" / "corrector.ckpt").string(), result.corrector,
                 "corrector");
    return result;
}

} // namespace

int cmd_run(const RunArgs& args) {
    try {
        const RunConfig cfg = args.config_path.empty()
                                  ? parse_config_text("", args.overrides)
                                  : parse_config(args.config_path, args.overrides);
        prepare_out_dir(args.out_dir, args.force);
        const RunResult result = execute_run(cfg, args.out_dir, args.quiet);
        if (!args.quiet)
            std::cout << "best " << result.best_test_acc << "  last " << result.last_test_acc
                      << "  rounds " << result.rounds.size() << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric error at epoch " << e.epoch() << ": " << e.what() << '\n';
        return kExitNumeric;
    }
}

int cmd_sweep(const SweepArgs& args) {
    std::string axis_key;
    if (args.axis == "eta")
        axis_key = "eta";
    else if (args.axis == "lambda")
        axis_key = "lambda";
    else if (args.axis == "frequency")
        axis_key = "correction_frequency";
    else {
        std::cerr << "config error [axis]: sweep axis must be eta, lambda or frequency\n";
        return kExitConfig;
    }
    if (args.values.empty()) {
        std::cerr << "config error [values]: sweep needs at least one value\n";
        return kExitConfig;
    }

    try {
        prepare_out_dir(args.out_dir, args.force);
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return kExitConfig;
    }

    std::ofstream summary(fs::path(args.out_dir) / "summary.csv");
    summary << "value,best_acc,last_acc\n";
    summary.flush();

    for (const std::string& value : args.values) {
        auto overrides = args.overrides;
        overrides.emplace_back(axis_key, value);
        const fs::path run_dir = fs::path(args.out_dir) / (args.axis + "_" + value);
        std::string best = "nan";
        std::string last = "nan";
        try {
            const RunConfig cfg = args.config_path.empty()
                                      ? parse_config_text("", overrides)
                                      : parse_config(args.config_path, overrides);
            prepare_out_dir(run_dir.string(), args.force);
            const RunResult result = execute_run(cfg, run_dir, args.quiet);
            best = format_double(result.best_test_acc);
            last = format_double(result.last_test_acc);
        } catch (const std::exception& e) {
            // Recorded as nan in the summary; the sweep keeps going.
            std::cerr << "sweep value " << value << " failed: " << e.what() << '\n';
        }
        summary << value << ',' << best << ',' << last << '\n';
        summary.flush();
    }
    return kExitOk;
}

int cmd_inspect(const std::string& run_dir) {
    const fs::path dir(run_dir);
    try {
        std::ifstream cfg_in(dir / "config.resolved");
        if (!cfg_in) throw ConfigError("run", run_dir + " has no config.resolved");
        std::cout << "# " << run_dir << "\n\n## config.resolved\n" << cfg_in.rdbuf() << '\n';

        std::ifstream summary_in(dir / "summary.json");
        if (summary_in) {
            const json summary = json::parse(summary_in);
            std::cout << "## summary\n" << summary.dump(2) << '\n';
        } else {
            std::cout << "## summary\n(none - run incomplete?)\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return kExitConfig;
    }
}

int cmd_export_plots_data(const std::string& run_dir, const std::string& out_file) {
    const fs::path dir(run_dir);
    std::ifstream metrics(dir / "metrics.csv");
    if (!metrics) {
        std::cerr << "config error [run]: " << run_dir << " has no metrics.csv\n";
        return kExitConfig;
    }
    const fs::path target = out_file.empty() ? dir / "plots.csv" : fs::path(out_file);
    std::ofstream out(target);
    if (!out) {
        std::cerr << "config error [out]: cannot write " << target.string() << '\n';
        return kExitConfig;
    }

    std::string header;
    std::getline(metrics, header);
    std::vector<std::string> columns;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ',')) columns.push_back(col);
    }

    out << "series,epoch,value\n";
    std::string line;
    while (std::getline(metrics, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns.size()) continue; // skip torn lines
        for (std::size_t j = 1; j < cells.size(); ++j)
            out << columns[j] << ',' << cells[0] << ',' << cells[j] << '\n';
    }
    return kExitOk;
}

} // namespace nllab::cli
