#include "nllab/loop.hpp"

#include "nllab/errors.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nllab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix modality_aux(const TwoHeadModel& model, const Matrix& z, CorrectionModality m) {
    switch (m) {
    case CorrectionModality::intermediate_features: return z;
    case CorrectionModality::final_layer_logits: return model.clean_head_logits(z);
    case CorrectionModality::pseudo_soft_labels: return model.clean_head_probs(z);
    }
    throw std::logic_error("unreachable modality");
}

} // namespace

void RunConfig::validate() const {
    if (data_source != "blobs" && data_source != "idx")
        throw ConfigError("data_source", "data_source must be 'blobs' or 'idx'");
    if (classes < 2) throw ConfigError("classes", "classes must be >= 2");
    if (feature_dim < 2) throw ConfigError("feature_dim", "feature_dim must be >= 2");
    if (data_source == "blobs") {
        if (feature_dim < classes)
            throw ConfigError("feature_dim", "feature_dim must be >= classes for blobs");
        if (train_size % classes != 0 || train_size == 0)
            throw ConfigError("train_size", "train_size must be a positive multiple of classes");
        if (test_size % classes != 0 || test_size == 0)
            throw ConfigError("test_size", "test_size must be a positive multiple of classes");
        if (blob_spread < 0.0) throw ConfigError("blob_spread", "blob_spread must be >= 0");
        if (blob_mean_distance <= 0.0)
            throw ConfigError("blob_mean_distance", "blob_mean_distance must be positive");
    }
    if (meta_fraction <= 0.0 || meta_fraction >= 1.0)
        throw ConfigError("meta_fraction", "meta_fraction must be in (0,1)");
    if (meta_ratio <= 0.0 || meta_ratio >= 1.0)
        throw ConfigError("meta_ratio", "meta_ratio must be in (0,1)");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("eta", "eta must be in [0,1]");
    if (noise_trunc_std < 0.0)
        throw ConfigError("noise_trunc_std", "noise_trunc_std must be >= 0");
    if (!asym_mapping.empty()) {
        if (asym_mapping.size() != classes)
            throw ConfigError("asym_mapping", "asym_mapping must list one target per class");
        for (int m : asym_mapping)
            if (m < 0 || m >= static_cast<int>(classes))
                throw ConfigError("asym_mapping", "asym_mapping entry out of range");
    }
    if (epochs_total < 1) throw ConfigError("epochs_total", "epochs_total must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs >= epochs_total)
        throw ConfigError("warmup_epochs", "warmup_epochs must be in [0, epochs_total)");
    if (correction_frequency < 1)
        throw ConfigError("correction_frequency", "correction_frequency must be >= 1");
    if (lambda < 0.0) throw ConfigError("lambda", "lambda must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be >= 1");
    if (hidden1 < 1 || hidden2 < 1)
        throw ConfigError("hidden1", "hidden layer widths must be >= 1");
    if (corrector_refresh_epochs < 0)
        throw ConfigError("corrector_refresh_epochs", "corrector_refresh_epochs must be >= 0");
    if (method != "ours" && method != "ce")
        throw ConfigError("method", "method must be 'ours' or 'ce'");
    try {
        sgd.validate();
        corrector.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("sgd", e.what());
    }
}

int correction_rounds(int epochs_total, int warmup_epochs, int correction_frequency) {
    if (correction_frequency < 1) throw std::invalid_argument("frequency must be >= 1");
    if (epochs_total <= warmup_epochs) return 0;
    return (epochs_total - warmup_epochs) / correction_frequency;
}

PreparedData prepare_data(const RunConfig& cfg) {
    cfg.validate();
    PreparedData out;

    Matrix pool_features;
    std::vector<int> pool_true;
    std::vector<int> pool_noisy;

    if (cfg.data_source == "blobs") {
        LabeledData pool = make_blobs(cfg.classes, cfg.feature_dim, cfg.train_size / cfg.classes,
                                      cfg.blob_spread, cfg.seed_data, cfg.blob_mean_distance);
        out.test = make_blobs(cfg.classes, cfg.feature_dim, cfg.test_size / cfg.classes,
                              cfg.blob_spread, cfg.seed_data + 1, cfg.blob_mean_distance);
        const Standardizer stats = Standardizer::fit(pool.features);
        stats.apply(pool.features);
        stats.apply(out.test.features);

        NoiseSpec spec;
        spec.kind = cfg.noise_kind;
        spec.eta = cfg.eta;
        spec.trunc_std = cfg.noise_trunc_std;
        spec.mapping = cfg.asym_mapping;
        spec.seed = cfg.seed_noise;
        pool_noisy = corrupt(pool.features, pool.labels, cfg.classes, spec);
        pool_true = std::move(pool.labels);
        pool_features = std::move(pool.features);
    } else {
        LabeledData pool = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
        out.test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
        for (int y : pool.labels)
            if (y < 0 || y >= static_cast<int>(cfg.classes))
                throw ConfigError("classes", "IDX label outside [0, classes)");
        const Standardizer stats = Standardizer::fit(pool.features);
        stats.apply(pool.features);
        stats.apply(out.test.features);
        pool_noisy = std::move(pool.labels); // observed labels are the noisy labels
        pool_features = std::move(pool.features);
    }

    NoisyDataset pool_ds;
    pool_ds.features = std::move(pool_features);
    pool_ds.noisy_labels = std::move(pool_noisy);
    pool_ds.true_labels = std::move(pool_true);
    pool_ds.c = cfg.classes;
    pool_ds.validate();

    auto [train, meta] = split_noisy_meta(pool_ds, cfg.meta_fraction, cfg.meta_ratio,
                                          cfg.seed_data + 2);
    out.train = std::move(train);
    out.meta = std::move(meta);
    return out;
}

double evaluate(const TwoHeadModel& model, const Matrix& features,
                const std::vector<int>& labels) {
    if (features.rows != labels.size())
        throw std::invalid_argument("evaluate: feature/label count mismatch");
    const Matrix probs = model.forward(features).clean_probs;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        if (static_cast<int>(argmax_row(probs.row(i))) == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double label_accuracy(const Matrix& soft_labels, const std::vector<int>& reference) {
    if (soft_labels.rows != reference.size())
        throw std::invalid_argument("label_accuracy: row/label count mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < soft_labels.rows; ++i)
        if (static_cast<int>(argmax_row(soft_labels.row(i))) == reference[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(reference.size());
}

RunResult run_algorithm1(const RunConfig& cfg, const NoisyDataset& train, const MetaSet& meta,
                         const LabeledData& test,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    train.validate();
    meta.validate();
    if (train.c != cfg.classes || meta.c != cfg.classes)
        throw std::invalid_argument("dataset class count does not match the config");
    if (train.dim() != meta.features.cols || train.dim() != test.features.cols)
        throw std::invalid_argument("dataset feature dims disagree");

    const Clock::time_point run_start = Clock::now();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    RunResult result;
    result.model = TwoHeadModel(
        {train.dim(), cfg.classes, cfg.hidden1, cfg.hidden2}, cfg.seed_model);
    SgdOptimizer opt(cfg.sgd);
    Rng shuffle_rng(cfg.seed_model + 1);

    // Corrected labels start as the observed one-hot noisy labels; they are
    // also the fixed train-side base component of the combination history.
    Matrix corrected = one_hot_rows(train.noisy_labels, cfg.classes);
    CorrectionHistory history;
    history.set_train_base(corrected);

    result.initial_label_acc =
        train.has_truth() ? label_accuracy(corrected, train.true_labels) : nan;

    const bool corrections_enabled = cfg.method == "ours";
    const std::vector<int> val_labels = meta.labels_at(meta.val_idx);

    std::vector<double> prev_omega = {1.0}; // all mass on the noisy base
    double prev_achieved = nan;
    bool guarantee_active = !cfg.no_convex_combination && cfg.history_cap == 0;
    double current_risk = nan;
    Mlp prev_corrector;
    bool have_corrector = false;

    for (int epoch = 1; epoch <= cfg.epochs_total; ++epoch) {
        Clock::time_point t0 = Clock::now();
        const double train_loss = result.model.train_one_epoch(
            train, corrected, cfg.lambda, opt, epoch, cfg.batch_size, shuffle_rng);
        result.times.classifier += seconds_since(t0);

        t0 = Clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.test_acc = evaluate(result.model, test.features, test.labels);
        rec.label_acc = train.has_truth() ? label_accuracy(corrected, train.true_labels) : nan;
        rec.metaval_risk = current_risk;
        rec.correction_count = static_cast<int>(result.rounds.size());
        result.times.evaluation += seconds_since(t0);
        result.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const bool round_due = corrections_enabled && epoch > cfg.warmup_epochs &&
                               (epoch - cfg.warmup_epochs) % cfg.correction_frequency == 0;
        if (!round_due) continue;

        const int round_index = static_cast<int>(result.rounds.size()) + 1;

        // --- snapshot: features on both sets, simulated posterior on meta ---
        // The aux representation is standardized on the meta set before it
        // reaches the corrector: the corrector's fixed learning rate is only
        // workable when its input scale is pinned.
        t0 = Clock::now();
        const FeatureSnapshot snap = result.model.snapshot(train, meta, round_index);
        Matrix aux_meta = modality_aux(result.model, snap.z_meta, cfg.corrector.modality);
        const Standardizer aux_stats = Standardizer::fit(aux_meta);
        aux_stats.apply(aux_meta);
        result.times.snapshot += seconds_since(t0);

        // --- corrector: fit on meta-train, select on meta-val, correct meta-val ---
        t0 = Clock::now();
        const Mlp* warm =
            (cfg.corrector_warm_start && have_corrector) ? &prev_corrector : nullptr;
        CorrectionNetConfig round_cfg = cfg.corrector;
        if (warm != nullptr && cfg.corrector_refresh_epochs > 0)
            round_cfg.max_epochs = cfg.corrector_refresh_epochs;
        CorrectionTrainResult fit =
            train_correction(meta, snap.noisy_posterior_meta, aux_meta, round_cfg,
                             cfg.seed_corrector + static_cast<std::uint64_t>(round_index), warm);
        const Matrix posterior_val = gather_rows(snap.noisy_posterior_meta, meta.val_idx);
        const Matrix aux_meta_val = gather_rows(aux_meta, meta.val_idx);
        const Matrix corr_val = apply_correction(fit.net, posterior_val, aux_meta_val);
        result.times.corrector += seconds_since(t0);

        RoundRecord round;
        round.round = round_index;
        round.epoch = epoch;
        round.corrector_epochs = fit.epochs_run;
        round.corrector_best_val_loss = fit.best_val_loss;

        if (cfg.no_convex_combination) {
            // Ablation: the latest correction becomes the target directly.
            t0 = Clock::now();
            Matrix aux_train = modality_aux(result.model, snap.z_train, cfg.corrector.modality);
            aux_stats.apply(aux_train);
            const Matrix onehot_noisy = one_hot_rows(train.noisy_labels, cfg.classes);
            corrected = apply_correction(fit.net, onehot_noisy, aux_train);
            result.times.label_update += seconds_since(t0);

            round.correction_count = round_index;
            round.omega = {1.0};
            round.achieved_risk = empirical_risk({1.0}, {corr_val}, val_labels);
            round.provenance = "vertex";
            round.vertex_index = 0;
            round.component_risks = {round.achieved_risk};
            round.base_refreshed = false;
            current_risk = round.achieved_risk;
        } else {
            // --- label update, part 1: correct the train set ---
            t0 = Clock::now();
            Matrix aux_train = modality_aux(result.model, snap.z_train, cfg.corrector.modality);
            aux_stats.apply(aux_train);
            const Matrix onehot_noisy = one_hot_rows(train.noisy_labels, cfg.classes);
            const Matrix corr_train = apply_correction(fit.net, onehot_noisy, aux_train);
            result.times.label_update += seconds_since(t0);

            // --- omega: refresh the base, extend the history, optimize ---
            t0 = Clock::now();
            const bool first_round = history.metaval_components().empty();
            Matrix old_base;
            if (!first_round) old_base = history.meta_base();
            history.refresh_meta_base(posterior_val);
            history.append(corr_train, corr_val);

            SimplexWeights weights = optimize_weights(history.metaval_components(), val_labels,
                                                      &prev_omega, SimplexSolverConfig{});
            bool refreshed = true;
            if (guarantee_active && !first_round && !std::isnan(prev_achieved) &&
                weights.achieved_risk > prev_achieved) {
                // The refreshed base pushed every candidate above the last
                // achieved risk; restore the old base so the warm start
                // reproduces it exactly.
                history.refresh_meta_base(old_base);
                weights = optimize_weights(history.metaval_components(), val_labels, &prev_omega,
                                           SimplexSolverConfig{});
                refreshed = false;
            }
            if (guarantee_active && !std::isnan(prev_achieved) &&
                weights.achieved_risk > prev_achieved + 1e-12)
                throw NumericError("combined meta-val risk increased across rounds", epoch);

            prev_omega = weights.omega;
            prev_achieved = weights.achieved_risk;
            current_risk = weights.achieved_risk;

            if (cfg.history_cap > 0) {
                const std::size_t dropped = history.truncate(cfg.history_cap);
                if (dropped > 0) {
                    prev_omega.erase(prev_omega.begin() + 1,
                                     prev_omega.begin() + 1 + static_cast<std::ptrdiff_t>(dropped));
                    prev_omega = project_simplex(std::move(prev_omega));
                }
            }
            result.times.omega += seconds_since(t0);

            // --- label update, part 2: convex combination ---
            t0 = Clock::now();
            corrected = combine_labels(prev_omega, history.train_components());
            result.times.label_update += seconds_since(t0);

            round.correction_count = static_cast<int>(history.corrections());
            round.omega = weights.omega;
            round.achieved_risk = weights.achieved_risk;
            round.provenance = to_string(weights.provenance);
            round.vertex_index = weights.vertex_index;
            round.component_risks = weights.component_risks;
            round.base_refreshed = refreshed;
        }

        prev_corrector = std::move(fit.net);
        have_corrector = true;
        result.rounds.push_back(std::move(round));
    }

    result.corrector = std::move(prev_corrector);
    result.has_corrector = have_corrector;

    result.final_label_acc =
        train.has_truth() ? label_accuracy(corrected, train.true_labels) : nan;
    result.last_test_acc = result.epochs.back().test_acc;
    result.best_test_acc = 0.0;
    for (const EpochRecord& rec : result.epochs)
        if (rec.test_acc > result.best_test_acc) {
            result.best_test_acc = rec.test_acc;
            result.best_epoch = rec.epoch;
        }
    result.times.total = seconds_since(run_start);
    return result;
}

RunResult run_baseline_ce(const RunConfig& cfg, const NoisyDataset& train, const MetaSet& meta,
                          const LabeledData& test,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
    RunConfig base = cfg;
    base.method = "ce";
    base.lambda = 0.0;
    return run_algorithm1(base, train, meta, test, on_epoch);
}

} // namespace nllab
