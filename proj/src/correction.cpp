#include "nllab/correction.hpp"

#include "nllab/errors.hpp"

#include <numeric>
#include <stdexcept>

namespace nllab {

void CorrectionNetConfig::validate() const {
    if (hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
    if (lr <= 0.0 || lr_after_decline <= 0.0)
        throw std::invalid_argument("correction learning rates must be positive");
    if (lr_after_decline >= lr)
        throw std::invalid_argument("lr_after_decline must be below lr");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (early_exit_patience < 1) throw std::invalid_argument("early_exit_patience must be >= 1");
    if (early_exit_min_delta < 0.0)
        throw std::invalid_argument("early_exit_min_delta must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

Matrix build_correction_input(const Matrix& posteriors, const Matrix& aux) {
    if (posteriors.rows != aux.rows)
        throw std::invalid_argument("build_correction_input: row count mismatch");
    Matrix out(posteriors.rows, posteriors.cols + aux.cols);
    for (std::size_t r = 0; r < out.rows; ++r) {
        auto dst = out.row(r);
        const auto p = posteriors.row(r);
        const auto a = aux.row(r);
        std::copy(p.begin(), p.end(), dst.begin());
        std::copy(a.begin(), a.end(), dst.begin() + static_cast<std::ptrdiff_t>(p.size()));
    }
    return out;
}

CorrectionTrainResult train_correction(const MetaSet& meta, const Matrix& posterior_meta,
                                       const Matrix& aux_meta, const CorrectionNetConfig& cfg,
                                       std::uint64_t seed, const Mlp* warm_start) {
    cfg.validate();
    meta.validate();
    if (meta.train_idx.empty() || meta.val_idx.empty())
        throw std::invalid_argument("train_correction: empty meta split");
    if (posterior_meta.rows != meta.size() || aux_meta.rows != meta.size())
        throw std::invalid_argument("train_correction: posterior/aux rows must cover the meta set");
    if (posterior_meta.cols != meta.c)
        throw std::invalid_argument("train_correction: posterior width must equal class count");

    const std::size_t in_dim = meta.c + aux_meta.cols;

    Rng rng(seed);
    Mlp net;
    if (warm_start != nullptr) {
        if (warm_start->input_dim() != in_dim || warm_start->output_dim() != meta.c)
            throw std::invalid_argument("train_correction: warm start shape mismatch");
        net = *warm_start;
    } else {
        net = Mlp({{in_dim, cfg.hidden_units, Activation::relu},
                   {cfg.hidden_units, meta.c, Activation::softmax_output}},
                  rng);
    }

    const Matrix inputs = build_correction_input(posterior_meta, aux_meta);
    const Matrix train_x = gather_rows(inputs, meta.train_idx);
    const Matrix val_x = gather_rows(inputs, meta.val_idx);
    const Matrix train_y = one_hot_rows(meta.labels_at(meta.train_idx), meta.c);
    const Matrix val_y = one_hot_rows(meta.labels_at(meta.val_idx), meta.c);

    // Plain SGD: milestones empty, momentum and weight decay zero. The one
    // scheduled event is the drop to lr_after_decline at the first rise of
    // the validation loss.
    SgdConfig sgd;
    sgd.learning_rate = cfg.lr;
    sgd.momentum = 0.0;
    sgd.weight_decay = 0.0;
    sgd.milestones.clear();

    CorrectionTrainResult result;
    result.best_val_loss = cross_entropy(net.forward(val_x).output(), val_y);
    result.net = net;
    result.best_epoch = -1; // the (possibly warm) initial state is a candidate

    SgdOptimizer opt(sgd);
    bool declined = false;
    std::vector<std::size_t> order(train_x.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    // The exit timer resets only on improvements of at least min_delta, so
    // an already-converged warm start stops after `patience` epochs even
    // while the val loss still creeps down in the last decimals.
    double exit_marker = result.best_val_loss;
    int exit_marker_epoch = -1;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix bx = gather_rows(train_x, idx);
            const Matrix by = gather_rows(train_y, idx);
            ForwardTrace trace = net.forward(bx);
            net.zero_grad();
            net.backward_cross_entropy(trace, by, 1.0);
            opt.step(net.params(), 0);
        }

        const double val_loss = cross_entropy(net.forward(val_x).output(), val_y);
        if (!result.val_loss_history.empty() && !declined &&
            val_loss > result.val_loss_history.back()) {
            declined = true;
            SgdConfig lowered = sgd;
            lowered.learning_rate = cfg.lr_after_decline;
            opt = SgdOptimizer(lowered);
        }
        result.val_loss_history.push_back(val_loss);
        result.epochs_run = epoch + 1;

        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.net = net;
        }
        if (val_loss < exit_marker - cfg.early_exit_min_delta) {
            exit_marker = val_loss;
            exit_marker_epoch = epoch;
        } else if (epoch - exit_marker_epoch >= cfg.early_exit_patience) {
            break;
        }
    }
    return result;
}

Matrix apply_correction(const Mlp& net, const Matrix& posteriors, const Matrix& aux) {
    const Matrix inputs = build_correction_input(posteriors, aux);
    if (inputs.cols != net.input_dim())
        throw std::invalid_argument("apply_correction: input width does not match the net");
    return net.forward(inputs).output();
}

const char* to_string(CorrectionModality m) {
    switch (m) {
    case CorrectionModality::intermediate_features: return "intermediate_features";
    case CorrectionModality::final_layer_logits: return "final_layer_logits";
    case CorrectionModality::pseudo_soft_labels: return "pseudo_soft_labels";
    }
    return "unknown";
}

CorrectionModality modality_from_string(const std::string& s) {
    if (s == "intermediate_features") return CorrectionModality::intermediate_features;
    if (s == "final_layer_logits") return CorrectionModality::final_layer_logits;
    if (s == "pseudo_soft_labels") return CorrectionModality::pseudo_soft_labels;
    throw ConfigError("modality", "unknown correction modality '" + s + "'");
}

} // namespace nllab
