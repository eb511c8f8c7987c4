#pragma once

#include "nllab/data.hpp"
#include "nllab/matrix.hpp"
#include "nllab/nn.hpp"

#include <cstdint>
#include <vector>

namespace nllab {

struct TwoHeadConfig {
    std::size_t input_dim = 0;
    std::size_t classes = 0;
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 64; // feature width the heads and corrector see
};

// Frozen per-iteration view of the model: extractor features on the train
// and meta sets plus the noisy head's posterior on the meta set. Taking one
// never mutates the model.
struct FeatureSnapshot {
    Matrix z_train;
    Matrix z_meta;
    Matrix noisy_posterior_meta;
    int iteration = 0;
};

// Shared extractor with two structurally identical softmax heads: the clean
// head learns the corrected targets, the noisy head learns the observed
// noisy labels and doubles as the noisy-posterior simulator.
class TwoHeadModel {
public:
    TwoHeadModel() = default;
    TwoHeadModel(const TwoHeadConfig& cfg, std::uint64_t seed);

    struct Output {
        Matrix clean_probs;
        Matrix noisy_probs;
        Matrix features;
    };

    // One extractor pass feeding both heads.
    Output forward(const Matrix& batch) const;

    // Mean over the batch of CE(clean, corrected) + lambda * CE(noisy, observed).
    double joint_loss(const Matrix& batch, const Matrix& corrected_targets,
                      const Matrix& noisy_onehot, double lambda) const;

    // Forward + backward + SGD on one mini-batch; returns the batch loss.
    double train_batch(const Matrix& batch, const Matrix& corrected_targets,
                       const Matrix& noisy_onehot, double lambda, SgdOptimizer& opt, int epoch);

    // Shuffled mini-batch epoch over the full dataset; returns mean loss.
    double train_one_epoch(const NoisyDataset& data, const Matrix& corrected_labels,
                           double lambda, SgdOptimizer& opt, int epoch, std::size_t batch_size,
                           Rng& shuffle_rng);

    // Fresh-optimizer convenience: per-epoch mean losses for `epochs` epochs.
    std::vector<double> train_epochs(const NoisyDataset& data, const Matrix& corrected_labels,
                                     double lambda, const SgdConfig& sgd, int epochs,
                                     std::uint64_t seed, std::size_t batch_size = 128);

    FeatureSnapshot snapshot(const NoisyDataset& data, const MetaSet& meta, int iteration) const;

    // Head outputs recomputed from stored features (cheap: one dense layer).
    Matrix clean_head_logits(const Matrix& z) const;
    Matrix clean_head_probs(const Matrix& z) const;

    std::size_t feature_dim() const noexcept { return cfg_.hidden2; }
    std::size_t classes() const noexcept { return cfg_.classes; }
    const TwoHeadConfig& config() const noexcept { return cfg_; }

    Mlp& extractor() { return extractor_; }
    Mlp& clean_head() { return clean_head_; }
    Mlp& noisy_head() { return noisy_head_; }
    const Mlp& extractor() const { return extractor_; }
    const Mlp& clean_head() const { return clean_head_; }
    const Mlp& noisy_head() const { return noisy_head_; }

    // theta_e + theta_c + theta_n, in a fixed order for the optimizer.
    std::vector<ParamTensor*> all_params();

private:
    TwoHeadConfig cfg_;
    Mlp extractor_;
    Mlp clean_head_;
    Mlp noisy_head_;
};

// CE(clean, corrected) + lambda * CE(noisy, observed) on already-computed
// probabilities; the value the model-level joint_loss reports.
double joint_loss_value(const Matrix& clean_probs, const Matrix& corrected_targets,
                        const Matrix& noisy_probs, const Matrix& noisy_onehot, double lambda);

} // namespace nllab
