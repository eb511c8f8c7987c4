#pragma once

#include "nllab/correction.hpp"
#include "nllab/data.hpp"
#include "nllab/noise.hpp"
#include "nllab/simplex.hpp"
#include "nllab/two_head.hpp"

#include <functional>
#include <string>
#include <vector>

namespace nllab {

// Full experiment configuration; every field has a documented flat-config
// key in the CLI.
struct RunConfig {
    // data
    std::string data_source = "blobs"; // blobs | idx
    std::size_t classes = 4;
    std::size_t feature_dim = 20;
    std::size_t train_size = 5000; // pool before the meta split
    std::size_t test_size = 2000;
    double blob_spread = 1.0;
    double blob_mean_distance = 4.0;
    double meta_fraction = 0.1;
    double meta_ratio = 0.8;
    std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;

    // noise (synthetic runs only)
    NoiseKind noise_kind = NoiseKind::symmetric;
    double eta = 0.4;
    double noise_trunc_std = 0.1;
    std::vector<int> asym_mapping; // empty = circular shift

    // classifier training. The desk-scale default raises weight decay to
    // 5e-3: a small dense extractor memorizes noisy labels within a few
    // epochs at 5e-4, and the correction loop needs pre-memorization
    // features to work from.
    int epochs_total = 100;
    int warmup_epochs = 40;
    int correction_frequency = 5;
    double lambda = 0.5;
    std::size_t batch_size = 128;
    SgdConfig sgd{0.1, 0.9, 5e-3, {60, 80}, 0.1};
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 64;

    // correction network. Round 1 trains from scratch under
    // corrector.max_epochs; warm-started later rounds only track feature
    // drift and get the smaller refresh budget (0 = same budget every round).
    CorrectionNetConfig corrector;
    bool corrector_warm_start = true;
    int corrector_refresh_epochs = 1;

    // convex combination
    std::size_t history_cap = 0; // 0 = unbounded

    // method switches
    std::string method = "ours"; // ours | ce (plain cross-entropy baseline)
    bool no_convex_combination = false;

    // write the corrupted training set (features, labels) into the run
    // directory as dataset.csv
    bool export_dataset = false;

    // seeds; the test split and epoch shuffling derive their streams from
    // seed_data and seed_model respectively
    std::uint64_t seed_data = 1;
    std::uint64_t seed_noise = 2;
    std::uint64_t seed_model = 3;
    std::uint64_t seed_corrector = 4;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double test_acc = 0.0;
    double label_acc = 0.0;    // argmax of the current targets vs hidden truth
    double metaval_risk = 0.0; // nan before the first correction round
    int correction_count = 0;  // K
};

struct RoundRecord {
    int round = 0; // 1-based
    int epoch = 0;
    int correction_count = 0; // K after this round
    std::vector<double> omega;
    double achieved_risk = 0.0;
    std::string provenance;
    int vertex_index = -1;
    std::vector<double> component_risks;
    bool base_refreshed = true;
    int corrector_epochs = 0;
    double corrector_best_val_loss = 0.0;
};

struct PhaseTimes {
    double classifier = 0.0;
    double evaluation = 0.0;
    double snapshot = 0.0;
    double corrector = 0.0;
    double omega = 0.0;
    double label_update = 0.0;
    double total = 0.0;

    // Share of the correction machinery (feature snapshot + corrector +
    // weight optimization) in the whole run.
    double correction_share() const {
        return total > 0.0 ? (snapshot + corrector + omega) / total : 0.0;
    }
};

struct RunResult {
    std::vector<EpochRecord> epochs;
    std::vector<RoundRecord> rounds;
    double best_test_acc = 0.0;
    int best_epoch = 0;
    double last_test_acc = 0.0;
    double initial_label_acc = 0.0; // nan without ground truth
    double final_label_acc = 0.0;   // accuracy of the final corrected labels
    PhaseTimes times;
    TwoHeadModel model;
    Mlp corrector;
    bool has_corrector = false;
};

struct PreparedData {
    NoisyDataset train;
    MetaSet meta;
    LabeledData test;
};

// Builds the standardized train/meta/test triple a config describes:
// synthetic blobs with injected label noise, or IDX files taken as-is.
PreparedData prepare_data(const RunConfig& cfg);

// Clean-head argmax accuracy; ties go to the lowest class index.
double evaluate(const TwoHeadModel& model, const Matrix& features,
                const std::vector<int>& labels);

// Fraction of rows whose argmax matches the reference label.
double label_accuracy(const Matrix& soft_labels, const std::vector<int>& reference);

// The closed-loop training run: warm-up, then every correction_frequency
// epochs a snapshot / corrector / weight-optimization / label-update round.
// on_epoch fires after each epoch record is final.
RunResult run_algorithm1(const RunConfig& cfg, const NoisyDataset& train, const MetaSet& meta,
                         const LabeledData& test,
                         const std::function<void(const EpochRecord&)>& on_epoch = {});

// Plain cross-entropy reference: same pipeline with corrections disabled
// and lambda forced to zero.
RunResult run_baseline_ce(const RunConfig& cfg, const NoisyDataset& train, const MetaSet& meta,
                          const LabeledData& test,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

// floor((epochs_total - warmup) / frequency): how many correction rounds a
// schedule produces.
int correction_rounds(int epochs_total, int warmup_epochs, int correction_frequency);

} // namespace nllab
