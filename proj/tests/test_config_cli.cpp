#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nllab/checkpoint.hpp"
#include "nllab/cli.hpp"
#include "nllab/config.hpp"
#include "nllab/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nllab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

// A config small enough for CLI round-trip tests.
const char* kSmallConfig = "train_size = 600\n"
                           "test_size = 200\n"
                           "epochs_total = 8\n"
                           "warmup_epochs = 3\n"
                           "correction_frequency = 4\n"
                           "corrector_max_epochs = 4\n";

fs::path write_small_config(const std::string& name) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << kSmallConfig;
    return path;
}

} // namespace

TEST_CASE("empty config text yields the documented defaults") {
    const RunConfig cfg = parse_config_text("");
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.warmup_epochs == 40);
    CHECK(cfg.correction_frequency == 5);
    CHECK(cfg.epochs_total == 100);
    CHECK(cfg.eta == 0.4);
    CHECK(cfg.corrector.hidden_units == 256);
    CHECK(cfg.corrector.lr == 0.001);
    CHECK(cfg.corrector.lr_after_decline == 0.0001);
    CHECK(cfg.meta_ratio == 0.8);
    CHECK(cfg.sgd.milestones == std::vector<int>{60, 80});
}

TEST_CASE("unknown keys and bad values are rejected with the key name") {
    try {
        parse_config_text("journey = nowhere\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "journey");
    }

    try {
        parse_config_text("eta = 1.5\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "eta");
    }

    CHECK_THROWS_AS(parse_config_text("lambda = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("this line has no equals\n"), ConfigError);
}

TEST_CASE("comments and blank lines are fine; overrides beat file values") {
    const std::string text = "# a comment\n"
                             "\n"
                             "correction_frequency = 7   # trailing comment\n"
                             "lambda = 0.2\n";
    const RunConfig plain = parse_config_text(text);
    CHECK(plain.correction_frequency == 7);
    CHECK(plain.lambda == 0.2);

    const RunConfig overridden = parse_config_text(text, {{"correction_frequency", "3"}});
    CHECK(overridden.correction_frequency == 3);
    CHECK(overridden.lambda == 0.2);
}

TEST_CASE("serialize/parse round-trips every key byte for byte") {
    RunConfig cfg;
    cfg.eta = 0.35;
    cfg.lambda = 0.7;
    cfg.noise_kind = NoiseKind::asymmetric;
    cfg.asym_mapping = {1, 2, 3, 0};
    cfg.corrector.modality = CorrectionModality::final_layer_logits;
    cfg.seed_model = 987654321;

    const std::string text = serialize_config(cfg);
    const RunConfig back = parse_config_text(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.eta == cfg.eta);
    CHECK(back.asym_mapping == cfg.asym_mapping);
    CHECK(back.corrector.modality == cfg.corrector.modality);
}

TEST_CASE("cmd_run writes the run directory contract") {
    const fs::path dir = fresh_dir("nllab_cli_run");
    cli::RunArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.out_dir = dir.string();
    args.quiet = true;
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);

    CHECK(fs::exists(dir / "config.resolved"));
    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "omega.json"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "checkpoints" / "model.ckpt"));
    CHECK(fs::exists(dir / "checkpoints" / "corrector.ckpt"));

    // config.resolved re-parses to the identical serialization
    const std::string resolved = slurp(dir / "config.resolved");
    const RunConfig back = parse_config_text(resolved);
    CHECK(serialize_config(back) == resolved);

    // metrics.csv has the pinned header and one complete line per epoch
    std::istringstream metrics(slurp(dir / "metrics.csv"));
    std::string line;
    std::getline(metrics, line);
    CHECK(line == "epoch,train_loss,test_acc,label_acc,metaval_risk,K");
    int rows = 0;
    while (std::getline(metrics, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);
}

TEST_CASE("two identical cmd_run invocations produce identical artifacts") {
    const fs::path a = fresh_dir("nllab_cli_det_a");
    const fs::path b = fresh_dir("nllab_cli_det_b");
    cli::RunArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.quiet = true;
    args.out_dir = a.string();
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);
    args.out_dir = b.string();
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);

    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "omega.json") == slurp(b / "omega.json"));
    CHECK(slurp(a / "config.resolved") == slurp(b / "config.resolved"));
    CHECK(slurp(a / "checkpoints" / "model.ckpt") == slurp(b / "checkpoints" / "model.ckpt"));
}

TEST_CASE("rerunning from config.resolved reproduces the artifacts byte for byte") {
    const fs::path a = fresh_dir("nllab_cli_resolved_a");
    cli::RunArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.out_dir = a.string();
    args.quiet = true;
    args.overrides = {{"lambda", "0.7"}, {"export_dataset", "true"}};
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);
    CHECK(fs::exists(a / "dataset.csv"));

    const fs::path b = fresh_dir("nllab_cli_resolved_b");
    cli::RunArgs again;
    again.config_path = (a / "config.resolved").string();
    again.out_dir = b.string();
    again.quiet = true;
    REQUIRE(cli::cmd_run(again) == cli::kExitOk);

    CHECK(slurp(a / "config.resolved") == slurp(b / "config.resolved"));
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "omega.json") == slurp(b / "omega.json"));
    CHECK(slurp(a / "dataset.csv") == slurp(b / "dataset.csv"));
}

TEST_CASE("cmd_inspect summarizes a run and rejects missing directories") {
    const fs::path dir = fresh_dir("nllab_cli_inspect");
    cli::RunArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.out_dir = dir.string();
    args.quiet = true;
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);
    CHECK(cli::cmd_inspect(dir.string()) == cli::kExitOk);
    CHECK(cli::cmd_inspect((dir / "nope").string()) == cli::kExitConfig);
}

TEST_CASE("cmd_run exit codes: config errors are 2, reuse needs --force") {
    const fs::path dir = fresh_dir("nllab_cli_codes");
    cli::RunArgs args;
    args.out_dir = dir.string();
    args.quiet = true;
    args.overrides = {{"eta", "1.5"}};
    CHECK(cli::cmd_run(args) == cli::kExitConfig);

    args.overrides = {{"no_such_key", "1"}};
    CHECK(cli::cmd_run(args) == cli::kExitConfig);

    // a finished run directory is not reused without --force
    args.overrides.clear();
    args.config_path = write_small_config("nllab_small.cfg").string();
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);
    CHECK(cli::cmd_run(args) == cli::kExitConfig);
    args.force = true;
    CHECK(cli::cmd_run(args) == cli::kExitOk);
}

TEST_CASE("cmd_sweep writes one row per value and keeps going on failure") {
    const fs::path dir = fresh_dir("nllab_cli_sweep");
    cli::SweepArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.out_dir = dir.string();
    args.axis = "lambda";
    args.values = {"0.2", "0.5", "nonsense"};
    args.quiet = true;
    REQUIRE(cli::cmd_sweep(args) == cli::kExitOk);

    std::istringstream summary(slurp(dir / "summary.csv"));
    std::string line;
    std::getline(summary, line);
    CHECK(line == "value,best_acc,last_acc");
    std::vector<std::string> rows;
    while (std::getline(summary, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].substr(0, 4) == "0.2,");
    CHECK(rows[2] == "nonsense,nan,nan");

    CHECK(fs::exists(dir / "lambda_0.2" / "metrics.csv"));
    CHECK(fs::exists(dir / "lambda_0.5" / "metrics.csv"));
}

TEST_CASE("cmd_sweep rejects an empty value list and unknown axes") {
    cli::SweepArgs args;
    args.out_dir = fresh_dir("nllab_cli_sweep_bad").string();
    args.axis = "lambda";
    CHECK(cli::cmd_sweep(args) == cli::kExitConfig);
    args.values = {"0.5"};
    args.axis = "granularity";
    CHECK(cli::cmd_sweep(args) == cli::kExitConfig);
}

TEST_CASE("export-plots-data flattens metrics into series rows") {
    const fs::path dir = fresh_dir("nllab_cli_export");
    cli::RunArgs args;
    args.config_path = write_small_config("nllab_small.cfg").string();
    args.out_dir = dir.string();
    args.quiet = true;
    REQUIRE(cli::cmd_run(args) == cli::kExitOk);
    REQUIRE(cli::cmd_export_plots_data(dir.string()) == cli::kExitOk);

    std::istringstream plots(slurp(dir / "plots.csv"));
    std::string line;
    std::getline(plots, line);
    CHECK(line == "series,epoch,value");
    int rows = 0;
    while (std::getline(plots, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8 * 5); // five series per epoch

    CHECK(cli::cmd_export_plots_data((dir / "missing").string()) == cli::kExitConfig);
}

TEST_CASE("checkpoints round-trip through the binary container") {
    Rng rng(3);
    Mlp net({{6, 5, Activation::relu}, {5, 3, Activation::softmax_output}}, rng);
    const fs::path path = fs::temp_directory_path() / "nllab_ckpt_test.bin";
    save_mlp(path.string(), net, "net");

    Rng rng2(99);
    Mlp other({{6, 5, Activation::relu}, {5, 3, Activation::softmax_output}}, rng2);
    load_mlp(path.string(), other, "net");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        CHECK(other.weight(l).values == net.weight(l).values);
        CHECK(other.bias(l).values == net.bias(l).values);
    }

    Rng rng3(1);
    Mlp wrong({{7, 5, Activation::relu}, {5, 3, Activation::softmax_output}}, rng3);
    CHECK_THROWS_AS(load_mlp(path.string(), wrong, "net"), ParseError);

    // corrupted magic is detected
    std::ofstream bad(path, std::ios::binary);
    bad << "NOTACKPT";
    bad.close();
    CHECK_THROWS_AS(load_checkpoint(path.string()), ParseError);
}
