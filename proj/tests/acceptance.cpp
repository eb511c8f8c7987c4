// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier criteria run the real CLI pipeline into a scratch
// directory and assert from the artifacts it writes (omega.json,
// summary.json, metrics.csv), the same files a user sees.

#include "nllab/cli.hpp"
#include "nllab/config.hpp"
#include "nllab/data.hpp"
#include "nllab/loop.hpp"
#include "nllab/noise.hpp"
#include "nllab/rng.hpp"
#include "nllab/simplex.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

using namespace nllab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double seconds, double budget_seconds) {
    const bool in_budget = seconds <= budget_seconds;
    if (!pass || !in_budget) ++failures;
    std::printf("[%d] %-34s %s  (%.1fs%s)  %s\n", criterion, name.c_str(),
                pass && in_budget ? "PASS" : "FAIL", seconds,
                in_budget ? "" : " OVER BUDGET", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path.string());
    return json::parse(in);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "nllab_acceptance";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

// Runs the CLI pipeline with the desk defaults plus overrides.
fs::path run_cli(const std::string& tag,
                 const std::vector<std::pair<std::string, std::string>>& overrides) {
    cli::RunArgs args;
    args.out_dir = (scratch_root() / tag).string();
    args.overrides = overrides;
    args.quiet = true;
    args.force = true;
    const int code = cli::cmd_run(args);
    if (code != cli::kExitOk)
        throw std::runtime_error("cli run '" + tag + "' exited with " + std::to_string(code));
    return scratch_root() / tag;
}

std::vector<std::pair<std::string, std::string>> seed_overrides(int s) {
    return {{"seed_data", std::to_string(s)},
            {"seed_noise", std::to_string(s + 1000)},
            {"seed_model", std::to_string(s + 2000)},
            {"seed_corrector", std::to_string(s + 3000)}};
}

// --------------------------------------------------------------------------
// criterion 3 helper: finite-difference oracle (independent of backward)
// --------------------------------------------------------------------------

double fd_worst_error(Mlp& net, const Matrix& x, const Matrix& y) {
    const double h = 1e-5;
    ForwardTrace trace = net.forward(x);
    net.zero_grad();
    net.backward_cross_entropy(trace, y, 1.0);
    double worst = 0.0;
    for (ParamTensor* p : net.params()) {
        for (std::size_t k = 0; k < p->size(); ++k) {
            const double orig = p->values[k];
            p->values[k] = orig + h;
            const double up = cross_entropy(net.forward(x).output(), y);
            p->values[k] = orig - h;
            const double down = cross_entropy(net.forward(x).output(), y);
            p->values[k] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double bp = p->grad[k];
            const double err = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-4});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

Matrix random_soft_rows(std::size_t n, std::size_t c, Rng& rng) {
    Matrix m(n, c);
    for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            m.at(r, j) = rng.uniform() + 0.02;
            sum += m.at(r, j);
        }
        for (std::size_t j = 0; j < c; ++j) m.at(r, j) /= sum;
    }
    return m;
}

double grid_best_risk(const std::vector<Matrix>& comps, const std::vector<int>& labels) {
    double best = 1e300;
    if (comps.size() == 2) {
        for (int i = 0; i <= 100; ++i)
            best = std::min(best,
                            empirical_risk({i / 100.0, 1.0 - i / 100.0}, comps, labels));
        return best;
    }
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100 - i; ++j)
            best = std::min(
                best, empirical_risk({i / 100.0, j / 100.0, 1.0 - i / 100.0 - j / 100.0},
                                     comps, labels));
    return best;
}

} // namespace

// --------------------------------------------------------------------------

int main() {
    std::printf("nllab acceptance suite\n");

    // The desk-scale runs behind criteria 1, 5, 7 and 8.
    const auto t_runs = Clock::now();
    const fs::path ours_dir = run_cli("ours_eta04", {});
    const fs::path ce4_dir = run_cli("ce_eta04", {{"method", "ce"}});
    const fs::path ce6_dir = run_cli("ce_eta06", {{"method", "ce"}, {"eta", "0.6"}});
    const double runs_seconds = std::chrono::duration<double>(Clock::now() - t_runs).count();

    const json ours = load_json(ours_dir / "summary.json");
    const json ce4 = load_json(ce4_dir / "summary.json");
    const json ce6 = load_json(ce6_dir / "summary.json");
    const json omega = load_json(ours_dir / "omega.json");

    // ---- criterion 1: monotone combined risk, asserted from omega.json ----
    {
        const auto t0 = Clock::now();
        bool pass = !omega["rounds"].empty();
        double worst_step = -1e300;
        double worst_vertex = -1e300;
        double prev = 0.0;
        bool have_prev = false;
        for (const json& round : omega["rounds"]) {
            const double risk = round["achieved_risk"].get<double>();
            for (const json& cr : round["component_risks"]) {
                worst_vertex = std::max(worst_vertex, risk - cr.get<double>());
                if (risk > cr.get<double>() + 1e-12) pass = false;
            }
            if (have_prev) {
                worst_step = std::max(worst_step, risk - prev);
                if (risk > prev + 1e-12) pass = false;
            }
            prev = risk;
            have_prev = true;
        }
        report(1, "Combined-risk guarantees", pass,
               "max round-over-round increase " + fmt(worst_step) +
                   ", max excess over best component " + fmt(worst_vertex),
               std::chrono::duration<double>(Clock::now() - t0).count(), 60.0);
    }

    // ---- criterion 2: solver within 1e-3 of exhaustive grid search ----
    {
        const auto t0 = Clock::now();
        Rng rng(20250808);
        bool pass = true;
        double worst = -1e300;
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 2 + rng.below(19); // <= 20 meta-val samples
            const std::size_t c = 2 + rng.below(4);
            const std::size_t m = 2 + rng.below(2); // K <= 2
            std::vector<Matrix> comps;
            for (std::size_t k = 0; k < m; ++k) comps.push_back(random_soft_rows(n, c, rng));
            std::vector<int> labels(n);
            for (int& y : labels) y = static_cast<int>(rng.below(c));
            const SimplexWeights w = optimize_weights(comps, labels, nullptr, {});
            const double excess = w.achieved_risk - grid_best_risk(comps, labels);
            worst = std::max(worst, excess);
            if (excess > 1e-3) pass = false;
        }
        report(2, "Solver-oracle equivalence", pass,
               "50 instances, worst excess over grid " + fmt(worst),
               std::chrono::duration<double>(Clock::now() - t0).count(), 10.0);
    }

    // ---- criterion 3: gradients vs central finite differences ----
    {
        const auto t0 = Clock::now();
        Rng rng(777);
        bool pass = true;
        double worst = 0.0;
        for (int pair = 0; pair < 100; ++pair) {
            const int layers = 1 + static_cast<int>(rng.below(3));
            std::vector<LayerSpec> specs;
            std::size_t in_dim = 2 + rng.below(15);
            const std::size_t input_dim = in_dim;
            for (int l = 0; l < layers; ++l) {
                // a few wide layers, the rest small: caps FD cost while still
                // exercising up to 64 units
                const std::size_t out_dim =
                    l + 1 == layers ? 2 + rng.below(5)
                                    : (pair % 17 == 0 ? 64 : 2 + rng.below(15));
                specs.push_back({in_dim, out_dim,
                                 l + 1 == layers ? Activation::softmax_output
                                                 : Activation::relu});
                in_dim = out_dim;
            }
            Mlp net(specs, rng);
            // random biases keep relu pre-activations off the exact kink,
            // where central differences straddle the subgradient
            for (std::size_t l = 0; l < net.layer_count(); ++l)
                for (double& b : net.bias(l).values) b = rng.uniform(-0.3, 0.3);
            Matrix x(1 + rng.below(6), input_dim);
            for (double& v : x.data) v = rng.normal();
            const Matrix y = random_soft_rows(x.rows, specs.back().out_dim, rng);
            const double err = fd_worst_error(net, x, y);
            worst = std::max(worst, err);
            if (err >= 1e-4) pass = false;
        }
        report(3, "Gradient correctness", pass, "100 nets, worst relative error " + fmt(worst),
               std::chrono::duration<double>(Clock::now() - t0).count(), 30.0);
    }

    // ---- criterion 4: noise statistics ----
    {
        const auto t0 = Clock::now();
        bool pass = true;
        std::string detail;

        // symmetric: empirical flip rate inside the 3-sigma binomial band
        std::vector<int> labels(10000);
        Rng lab_rng(5);
        for (int& y : labels) y = static_cast<int>(lab_rng.below(4));
        int sym_seed = 100;
        for (double eta : {0.2, 0.4, 0.6}) {
            const auto noisy = corrupt_with_matrix(labels, symmetric_matrix(4, eta), sym_seed++);
            std::size_t flips = 0;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] != noisy[i]) ++flips;
            const double rate = static_cast<double>(flips) / 10000.0;
            const double expect = eta * 3.0 / 4.0;
            const double band = 3.0 * std::sqrt(expect * (1.0 - expect) / 10000.0);
            if (std::abs(rate - expect) > band) pass = false;
            detail += "sym" + fmt(eta) + ":" + fmt(rate) + " ";
        }

        // asymmetric circular shift: flips land only on the mapped class
        {
            const auto mapping = circular_shift_mapping(4);
            const auto noisy =
                corrupt_with_matrix(labels, asymmetric_matrix(4, 0.4, mapping), 321);
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (noisy[i] != labels[i] &&
                    noisy[i] != mapping[static_cast<std::size_t>(labels[i])])
                    pass = false;
            detail += "asym:mapped-only ";
        }

        // instance-dependent: rate within 0.03 of the truncated-normal mean
        {
            LabeledData blobs = make_blobs(4, 20, 2500, 1.0, 88);
            const Standardizer stats = Standardizer::fit(blobs.features);
            stats.apply(blobs.features);
            const auto noisy =
                instance_dependent_corrupt(blobs.features, blobs.labels, 4, 0.4, 77, 0.1);
            std::size_t flips = 0;
            for (std::size_t i = 0; i < blobs.labels.size(); ++i)
                if (blobs.labels[i] != noisy[i]) ++flips;
            const double rate = static_cast<double>(flips) / 10000.0;
            const double expect = truncated_normal_mean(0.4, 0.1, 0.0, 1.0);
            if (std::abs(rate - expect) > 0.03) pass = false;
            detail += "inst:" + fmt(rate) + " vs " + fmt(expect);
        }

        report(4, "Noise statistics", pass, detail,
               std::chrono::duration<double>(Clock::now() - t0).count(), 5.0);
    }

    // ---- criterion 5: desk-scale end-to-end ordering ----
    {
        const double initial = ours["initial_label_acc"].get<double>();
        const double final_labels = ours["final_label_acc"].get<double>();
        const double ours_best = ours["best_test_acc"].get<double>();
        const double ours_last = ours["last_test_acc"].get<double>();
        const double ce4_last = ce4["last_test_acc"].get<double>();
        const double ce6_drop =
            ce6["best_test_acc"].get<double>() - ce6["last_test_acc"].get<double>();

        const bool a = final_labels >= initial + 0.05;
        const bool b = ours_last >= ce4_last + 0.03;
        const bool c = (ours_best - ours_last <= 0.02) && (ce6_drop >= 0.03);
        report(5, "End-to-end ordering", a && b && c,
               "(a) labels " + fmt(initial) + "->" + fmt(final_labels) + " (b) ours " +
                   fmt(ours_last) + " vs ce+0.03 " + fmt(ce4_last + 0.03) + " (c) ours drop " +
                   fmt(ours_best - ours_last) + ", ce@0.6 drop " + fmt(ce6_drop),
               runs_seconds, 300.0);
    }

    // ---- criterion 6: ablation directions over 3 seeds ----
    {
        const auto t0 = Clock::now();
        double full_sum = 0.0, noconvex_sum = 0.0, pseudo_sum = 0.0;
        for (int s = 1; s <= 3; ++s) {
            auto base = seed_overrides(s);
            full_sum += load_json(run_cli("ab_full_" + std::to_string(s), base) /
                                  "summary.json")["last_test_acc"]
                            .get<double>();
            auto noconv = base;
            noconv.emplace_back("no_convex_combination", "true");
            noconvex_sum += load_json(run_cli("ab_noconvex_" + std::to_string(s), noconv) /
                                      "summary.json")["last_test_acc"]
                                .get<double>();
            auto pseudo = base;
            pseudo.emplace_back("modality", "pseudo_soft_labels");
            pseudo_sum += load_json(run_cli("ab_pseudo_" + std::to_string(s), pseudo) /
                                    "summary.json")["last_test_acc"]
                              .get<double>();
        }
        const double mean_full = full_sum / 3.0;
        const double mean_noconvex = noconvex_sum / 3.0;
        const double mean_pseudo = pseudo_sum / 3.0;
        const bool pass = mean_full > mean_noconvex && mean_full > mean_pseudo;
        report(6, "Ablation direction", pass,
               "full " + fmt(mean_full) + " vs no-convex " + fmt(mean_noconvex) +
                   " vs pseudo-soft-labels " + fmt(mean_pseudo),
               std::chrono::duration<double>(Clock::now() - t0).count(), 900.0);
    }

    // ---- criterion 7: schedule count and byte-identical reruns ----
    {
        const auto t0 = Clock::now();
        const bool twelve = omega["rounds"].size() == 12;
        const fs::path rerun_dir = run_cli("ours_eta04_rerun", {});
        const bool identical =
            slurp(ours_dir / "metrics.csv") == slurp(rerun_dir / "metrics.csv") &&
            slurp(ours_dir / "omega.json") == slurp(rerun_dir / "omega.json");
        report(7, "Schedule and determinism", twelve && identical,
               std::to_string(omega["rounds"].size()) + " rounds for (100,40,5); rerun " +
                   (identical ? "byte-identical" : "differs"),
               std::chrono::duration<double>(Clock::now() - t0).count(), 120.0);
    }

    // ---- criterion 8: correction-phase wall-clock share ----
    {
        const double share = ours["timing"]["correction_share"].get<double>();
        report(8, "Correction-phase cost", share < 0.10,
               "snapshot+corrector+omega share " + fmt(share) + " of " +
                   fmt(ours["timing"]["total_s"].get<double>()) + "s total",
               0.0, 1.0);
    }

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
