#include "nllab/two_head.hpp"

#include "nllab/errors.hpp"
#include "nllab/kernels.hpp"

#include <numeric>
#include <stdexcept>

namespace nllab {

TwoHeadModel::TwoHeadModel(const TwoHeadConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.input_dim < 1 || cfg.classes < 2)
        throw std::invalid_argument("TwoHeadModel: need input_dim >= 1 and classes >= 2");
    Rng rng(seed);
    extractor_ = Mlp({{cfg.input_dim, cfg.hidden1, Activation::relu},
                      {cfg.hidden1, cfg.hidden2, Activation::relu}},
                     rng);
    clean_head_ = Mlp({{cfg.hidden2, cfg.classes, Activation::softmax_output}}, rng);
    noisy_head_ = Mlp({{cfg.hidden2, cfg.classes, Activation::softmax_output}}, rng);
}

TwoHeadModel::Output TwoHeadModel::forward(const Matrix& batch) const {
    Output out;
    ForwardTrace ext = extractor_.forward(batch);
    out.clean_probs = clean_head_.forward(ext.output()).output();
    out.noisy_probs = noisy_head_.forward(ext.output()).output();
    out.features = std::move(ext.acts.back());
    return out;
}

double joint_loss_value(const Matrix& clean_probs, const Matrix& corrected_targets,
                        const Matrix& noisy_probs, const Matrix& noisy_onehot, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    double loss = cross_entropy(clean_probs, corrected_targets);
    if (lambda != 0.0) loss += lambda * cross_entropy(noisy_probs, noisy_onehot);
    return loss;
}

double TwoHeadModel::joint_loss(const Matrix& batch, const Matrix& corrected_targets,
                                const Matrix& noisy_onehot, double lambda) const {
    const Output out = forward(batch);
    return joint_loss_value(out.clean_probs, corrected_targets, out.noisy_probs, noisy_onehot,
                            lambda);
}

double TwoHeadModel::train_batch(const Matrix& batch, const Matrix& corrected_targets,
                                 const Matrix& noisy_onehot, double lambda, SgdOptimizer& opt,
                                 int epoch) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");

    ForwardTrace ext = extractor_.forward(batch);
    ForwardTrace clean = clean_head_.forward(ext.output());
    ForwardTrace noisy = noisy_head_.forward(ext.output());

    extractor_.zero_grad();
    clean_head_.zero_grad();
    noisy_head_.zero_grad();

    Matrix dz_clean;
    double loss = clean_head_.backward_cross_entropy(clean, corrected_targets, 1.0, &dz_clean);
    if (lambda != 0.0) {
        Matrix dz_noisy;
        loss += noisy_head_.backward_cross_entropy(noisy, noisy_onehot, lambda, &dz_noisy);
        for (std::size_t k = 0; k < dz_clean.data.size(); ++k)
            dz_clean.data[k] += dz_noisy.data[k];
    }
    extractor_.backward_output_gradient(ext, dz_clean);

    opt.step(all_params(), epoch);
    return loss;
}

double TwoHeadModel::train_one_epoch(const NoisyDataset& data, const Matrix& corrected_labels,
                                     double lambda, SgdOptimizer& opt, int epoch,
                                     std::size_t batch_size, Rng& shuffle_rng) {
    if (corrected_labels.rows != data.size() || corrected_labels.cols != cfg_.classes)
        throw std::invalid_argument("corrected label matrix does not match dataset");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    const Matrix noisy_onehot = one_hot_rows(data.noisy_labels, cfg_.classes);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, order.size());
        std::span<const std::size_t> idx(order.data() + start, end - start);
        const Matrix bx = gather_rows(data.features, idx);
        const Matrix by = gather_rows(corrected_labels, idx);
        const Matrix bn = gather_rows(noisy_onehot, idx);
        loss_sum += train_batch(bx, by, bn, lambda, opt, epoch);
        ++batches;
    }
    return loss_sum / static_cast<double>(batches);
}

std::vector<double> TwoHeadModel::train_epochs(const NoisyDataset& data,
                                               const Matrix& corrected_labels, double lambda,
                                               const SgdConfig& sgd, int epochs,
                                               std::uint64_t seed, std::size_t batch_size) {
    SgdOptimizer opt(sgd);
    Rng shuffle_rng(seed);
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(epochs));
    for (int e = 0; e < epochs; ++e)
        losses.push_back(
            train_one_epoch(data, corrected_labels, lambda, opt, e, batch_size, shuffle_rng));
    return losses;
}

FeatureSnapshot TwoHeadModel::snapshot(const NoisyDataset& data, const MetaSet& meta,
                                       int iteration) const {
    FeatureSnapshot snap;
    snap.iteration = iteration;
    snap.z_train = extractor_.forward(data.features).output();
    ForwardTrace meta_trace = extractor_.forward(meta.features);
    snap.noisy_posterior_meta = noisy_head_.forward(meta_trace.output()).output();
    snap.z_meta = std::move(meta_trace.acts.back());
    return snap;
}

Matrix TwoHeadModel::clean_head_logits(const Matrix& z) const {
    Matrix out;
    Matrix w;
    w.rows = clean_head_.weight(0).shape[0];
    w.cols = clean_head_.weight(0).shape[1];
    w.data = clean_head_.weight(0).values;
    dense_forward(z, w, clean_head_.bias(0).values, out);
    return out;
}

Matrix TwoHeadModel::clean_head_probs(const Matrix& z) const {
    Matrix out = clean_head_logits(z);
    softmax_rows(out);
    return out;
}

std::vector<ParamTensor*> TwoHeadModel::all_params() {
    std::vector<ParamTensor*> out = extractor_.params();
    for (ParamTensor* p : clean_head_.params()) out.push_back(p);
    for (ParamTensor* p : noisy_head_.params()) out.push_back(p);
    return out;
}

} // namespace nllab
