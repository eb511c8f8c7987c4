#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nllab/config.hpp"
#include "nllab/errors.hpp"
#include "nllab/loop.hpp"

#include <cmath>
#include <sstream>
#include <vector>

using namespace nllab;

namespace {

// Small, fast configuration used by most loop tests: ~1.5 s per run.
RunConfig small_config() {
    RunConfig cfg;
    cfg.train_size = 1000;
    cfg.test_size = 400;
    cfg.epochs_total = 14;
    cfg.warmup_epochs = 4;
    cfg.correction_frequency = 5;
    cfg.corrector.max_epochs = 6;
    return cfg;
}

std::string metrics_csv(const RunResult& result) {
    std::ostringstream out;
    for (const EpochRecord& rec : result.epochs)
        out << rec.epoch << ',' << format_double(rec.train_loss) << ','
            << format_double(rec.test_acc) << ',' << format_double(rec.label_acc) << ','
            << format_double(rec.metaval_risk) << ',' << rec.correction_count << '\n';
    return out.str();
}

} // namespace

TEST_CASE("correction round count follows floor((total - warmup) / frequency)") {
    CHECK(correction_rounds(100, 40, 5) == 12);
    CHECK(correction_rounds(100, 40, 8) == 7);
    CHECK(correction_rounds(100, 40, 70) == 0);
    CHECK(correction_rounds(100, 40, 60) == 1);
    CHECK(correction_rounds(15, 15, 1) == 0);
}

TEST_CASE("a short run executes exactly the scheduled rounds at the right epochs") {
    const RunConfig cfg = small_config();
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);

    REQUIRE(static_cast<int>(result.rounds.size()) ==
            correction_rounds(cfg.epochs_total, cfg.warmup_epochs, cfg.correction_frequency));
    CHECK(result.rounds[0].epoch == 9);
    CHECK(result.rounds[1].epoch == 14);
    CHECK(result.epochs.size() == 14);
}

TEST_CASE("frequency beyond the post-warmup budget degenerates to plain training") {
    RunConfig cfg = small_config();
    cfg.correction_frequency = 11; // > 14 - 4
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);
    CHECK(result.rounds.empty());
    CHECK(result.final_label_acc == doctest::Approx(result.initial_label_acc));
    for (const EpochRecord& rec : result.epochs) CHECK(std::isnan(rec.metaval_risk));
}

TEST_CASE("identical configs and seeds produce byte-identical metrics") {
    const RunConfig cfg = small_config();
    PreparedData d1 = prepare_data(cfg);
    PreparedData d2 = prepare_data(cfg);
    const RunResult r1 = run_algorithm1(cfg, d1.train, d1.meta, d1.test);
    const RunResult r2 = run_algorithm1(cfg, d2.train, d2.meta, d2.test);
    CHECK(metrics_csv(r1) == metrics_csv(r2));
}

TEST_CASE("combined meta-val risk never increases across rounds") {
    RunConfig cfg = small_config();
    cfg.epochs_total = 24;
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);
    REQUIRE(result.rounds.size() >= 3);
    for (std::size_t r = 1; r < result.rounds.size(); ++r)
        CHECK(result.rounds[r].achieved_risk <= result.rounds[r - 1].achieved_risk + 1e-12);
    for (const RoundRecord& round : result.rounds)
        for (double cr : round.component_risks)
            CHECK(round.achieved_risk <= cr + 1e-12);
}

TEST_CASE("training targets stay on the simplex every epoch") {
    // enforced by cross_entropy's validation inside every batch: a run that
    // finishes has only ever seen simplex rows. Also check the final labels.
    RunConfig cfg = small_config();
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);
    CHECK(result.final_label_acc >= 0.0);
}

TEST_CASE("ce baseline matches the main method bit for bit through the warm-up") {
    RunConfig cfg = small_config();
    cfg.epochs_total = 6;
    cfg.warmup_epochs = 5; // one round only at the very end for the main method
    cfg.correction_frequency = 1;
    PreparedData data = prepare_data(cfg);

    // same lambda on both sides isolates the correction machinery
    RunConfig ce = cfg;
    ce.method = "ce";
    const RunResult ours = run_algorithm1(cfg, data.train, data.meta, data.test);
    const RunResult base = run_algorithm1(ce, data.train, data.meta, data.test);

    for (int e = 0; e < 5; ++e) {
        CHECK(ours.epochs[e].train_loss == base.epochs[e].train_loss);
        CHECK(ours.epochs[e].test_acc == base.epochs[e].test_acc);
    }
}

TEST_CASE("run_baseline_ce disables corrections and zeroes lambda") {
    RunConfig cfg = small_config();
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_baseline_ce(cfg, data.train, data.meta, data.test);
    CHECK(result.rounds.empty());
    CHECK(result.best_test_acc >= result.last_test_acc);
    CHECK(result.final_label_acc == doctest::Approx(result.initial_label_acc));
}

TEST_CASE("no_convex_combination uses the newest correction directly") {
    RunConfig cfg = small_config();
    cfg.no_convex_combination = true;
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);
    REQUIRE(!result.rounds.empty());
    for (const RoundRecord& round : result.rounds) {
        CHECK(round.omega == std::vector<double>{1.0});
        CHECK(round.provenance == "vertex");
        CHECK(round.component_risks.size() == 1);
    }
}

TEST_CASE("label_accuracy: perfect labels, uniform tie-break") {
    const std::vector<int> truth = {0, 1, 2, 1};
    const Matrix perfect = one_hot_rows(truth, 3);
    CHECK(label_accuracy(perfect, truth) == 1.0);

    // all-uniform rows argmax to class 0 by the lowest-index rule
    const Matrix uniform(4, 3, 1.0 / 3.0);
    CHECK(label_accuracy(uniform, truth) == doctest::Approx(0.25));
}

TEST_CASE("noisy-label accuracy starts near 1 - eta(c-1)/c") {
    RunConfig cfg = small_config();
    cfg.train_size = 4000;
    cfg.eta = 0.4;
    PreparedData data = prepare_data(cfg);
    const Matrix onehot = one_hot_rows(data.train.noisy_labels, cfg.classes);
    const double acc = label_accuracy(onehot, data.train.true_labels);
    const double expected = 1.0 - 0.4 * 3.0 / 4.0;
    const double band = 3.0 * std::sqrt(0.3 * 0.7 / static_cast<double>(data.train.size()));
    CHECK(std::abs(acc - expected) < band);
}

TEST_CASE("history cap truncates and still runs to completion") {
    RunConfig cfg = small_config();
    cfg.epochs_total = 24;
    cfg.history_cap = 2;
    PreparedData data = prepare_data(cfg);
    const RunResult result = run_algorithm1(cfg, data.train, data.meta, data.test);
    REQUIRE(result.rounds.size() >= 3);
    // with the cap, later rounds optimize over at most base + cap + 1 fresh
    for (std::size_t r = 2; r < result.rounds.size(); ++r)
        CHECK(result.rounds[r].omega.size() <= 4);
}

TEST_CASE("mismatched dataset and config are rejected") {
    RunConfig cfg = small_config();
    PreparedData data = prepare_data(cfg);
    RunConfig wrong = cfg;
    wrong.classes = 5;
    wrong.train_size = 1000; // multiple of 5 to pass validate()
    wrong.test_size = 400;
    CHECK_THROWS_AS(run_algorithm1(wrong, data.train, data.meta, data.test),
                    std::invalid_argument);
}

TEST_CASE("run config invariants carry key names") {
    RunConfig cfg;
    cfg.eta = 1.5;
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "eta");
    }

    cfg = {};
    cfg.warmup_epochs = cfg.epochs_total;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.correction_frequency = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
