#pragma once

#include "nllab/matrix.hpp"
#include "nllab/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nllab {

// Probabilities are clamped to [kLogClamp, 1] before any log. Chosen so a
// confident wrong prediction cannot produce -inf; small enough that the
// gradient shortcut (p - y) stays accurate for everything we train.
inline constexpr double kLogClamp = 1e-12;

enum class Activation { relu, identity, softmax_output };

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::identity;
};

// One trainable tensor: values and grad always share the same shape and are
// kept finite by the ops that write them.
struct ParamTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;

    static ParamTensor zeros(std::vector<std::size_t> shape);

    std::size_t size() const noexcept { return values.size(); }
};

struct SgdConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<int> milestones = {60, 80};
    double decay_factor = 0.1;

    // Stepped-down rate: decay_factor applied once per milestone <= epoch.
    double lr_at(int epoch) const;
    void validate() const;
};

// Activations captured by a forward pass; acts[0] is the input batch and
// acts[i+1] the post-activation output of layer i. backward() needs it, and
// the feature snapshot reads hidden activations out of it.
struct ForwardTrace {
    std::vector<Matrix> acts;

    const Matrix& output() const { return acts.back(); }
};

// Dense feed-forward stack with explicit per-layer backward. This is the
// whole differentiation engine: the artifact only ever needs chains of
// dense layers, so there is no graph.
class Mlp {
public:
    Mlp() = default;
    // Glorot-uniform weights, zero biases.
    Mlp(std::vector<LayerSpec> specs, Rng& rng);

    ForwardTrace forward(const Matrix& x) const;

    // Mean cross-entropy of the softmax output against (soft) target rows,
    // times scale. Gradients are scaled the same way and accumulated into
    // each parameter's grad; returns the scaled loss. If dx is non-null it
    // receives the gradient w.r.t. the input batch.
    double backward_cross_entropy(const ForwardTrace& trace, const Matrix& targets,
                                  double scale, Matrix* dx = nullptr);

    // Backward from an arbitrary gradient on the output (final activation
    // must not be softmax_output). Used for the extractor, whose output
    // feeds several heads.
    void backward_output_gradient(const ForwardTrace& trace, const Matrix& dout,
                                  Matrix* dx = nullptr);

    void zero_grad();

    std::size_t layer_count() const noexcept { return specs_.size(); }
    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    std::size_t input_dim() const { return specs_.front().in_dim; }
    std::size_t output_dim() const { return specs_.back().out_dim; }

    ParamTensor& weight(std::size_t layer) { return weights_[layer]; }
    const ParamTensor& weight(std::size_t layer) const { return weights_[layer]; }
    ParamTensor& bias(std::size_t layer) { return biases_[layer]; }
    const ParamTensor& bias(std::size_t layer) const { return biases_[layer]; }

    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;

private:
    void backward_from_delta(const ForwardTrace& trace, Matrix delta, std::size_t top_layer,
                             Matrix* dx);
    void check_trace(const ForwardTrace& trace) const;

    std::vector<LayerSpec> specs_;
    std::vector<ParamTensor> weights_; // [out_dim x in_dim]
    std::vector<ParamTensor> biases_;  // [out_dim]
};

// Mean over rows of -sum_j target[j] * log(clamp(pred[j])). Both pred and
// target rows must sit on the simplex within 1e-6.
double cross_entropy(const Matrix& pred, const Matrix& target);

// v <- momentum*v + grad + weight_decay*param; param <- param - lr(epoch)*v.
class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdConfig cfg);

    void step(const std::vector<ParamTensor*>& params, int epoch);

    const SgdConfig& config() const noexcept { return cfg_; }

private:
    SgdConfig cfg_;
    std::vector<std::vector<double>> velocity_;
};

} // namespace nllab
