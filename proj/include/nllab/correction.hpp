#pragma once

#include "nllab/data.hpp"
#include "nllab/matrix.hpp"
#include "nllab/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nllab {

// Auxiliary representation fed to the corrector next to the noisy posterior.
enum class CorrectionModality { intermediate_features, final_layer_logits, pseudo_soft_labels };

struct CorrectionNetConfig {
    std::size_t hidden_units = 256;
    double lr = 1e-3;
    double lr_after_decline = 1e-4; // applied once, at the first val-loss rise
    int max_epochs = 12;
    // Stop when the val loss has not improved by at least early_exit_min_delta
    // for early_exit_patience epochs. A warm-started corrector that only
    // tracks feature drift exits within a few epochs; a cold one trains on.
    int early_exit_patience = 3;
    double early_exit_min_delta = 2e-3;
    std::size_t batch_size = 8;
    CorrectionModality modality = CorrectionModality::intermediate_features;

    void validate() const;
};

// [posterior || aux], one row per sample. The first c entries of every row
// are the posterior, bit-exact.
Matrix build_correction_input(const Matrix& posteriors, const Matrix& aux);

struct CorrectionTrainResult {
    Mlp net; // the state with minimal recorded meta-val loss
    std::vector<double> val_loss_history;
    double best_val_loss = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
};

// Fits the corrector on meta-train pairs (input = simulated posterior plus
// aux, target = one-hot clean label) and selects the epoch state with the
// lowest meta-val loss. Plain SGD, no momentum. Optionally warm-started
// from a previous round's corrector.
CorrectionTrainResult train_correction(const MetaSet& meta, const Matrix& posterior_meta,
                                       const Matrix& aux_meta, const CorrectionNetConfig& cfg,
                                       std::uint64_t seed, const Mlp* warm_start = nullptr);

// Row-stochastic corrected distributions for a batch of (posterior, aux)
// pairs. Pure: same inputs, same outputs.
Matrix apply_correction(const Mlp& net, const Matrix& posteriors, const Matrix& aux);

const char* to_string(CorrectionModality m);
CorrectionModality modality_from_string(const std::string& s);

} // namespace nllab
