#include "nllab/nn.hpp"

#include "nllab/errors.hpp"
#include "nllab/kernels.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nllab {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_simplex_rows(const Matrix& m, const char* what) {
    for (std::size_t n = 0; n < m.rows; ++n) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double v = m.at(n, j);
            if (v < -1e-9) throw std::invalid_argument(std::string(what) + ": negative entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument(std::string(what) + ": row off simplex");
    }
}

} // namespace

ParamTensor ParamTensor::zeros(std::vector<std::size_t> shape) {
    ParamTensor t;
    const std::size_t n = shape_size(shape);
    t.shape = std::move(shape);
    t.values.assign(n, 0.0);
    t.grad.assign(n, 0.0);
    return t;
}

double SgdConfig::lr_at(int epoch) const {
    double lr = learning_rate;
    for (int m : milestones)
        if (m <= epoch) lr *= decay_factor;
    return lr;
}

void SgdConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
    if (decay_factor <= 0.0 || decay_factor > 1.0)
        throw std::invalid_argument("decay_factor must be in (0,1]");
    for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
            throw std::invalid_argument("milestones must be strictly increasing");
}

Mlp::Mlp(std::vector<LayerSpec> specs, Rng& rng) : specs_(std::move(specs)) {
    if (specs_.empty()) throw std::invalid_argument("Mlp needs at least one layer");
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const auto& s = specs_[l];
        if (s.in_dim < 1 || s.out_dim < 1)
            throw std::invalid_argument("layer dims must be >= 1");
        if (l > 0 && specs_[l - 1].out_dim != s.in_dim)
            throw std::invalid_argument("layer dims do not chain");
        ParamTensor w = ParamTensor::zeros({s.out_dim, s.in_dim});
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
        for (double& v : w.values) v = rng.uniform(-bound, bound);
        weights_.push_back(std::move(w));
        biases_.push_back(ParamTensor::zeros({s.out_dim}));
    }
}

ForwardTrace Mlp::forward(const Matrix& x) const {
    if (x.cols != specs_.front().in_dim)
        throw std::invalid_argument("batch width does not match first layer in_dim");
    ForwardTrace trace;
    trace.acts.reserve(specs_.size() + 1);
    trace.acts.push_back(x);
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        Matrix out;
        Matrix w;
        w.rows = specs_[l].out_dim;
        w.cols = specs_[l].in_dim;
        w.data = weights_[l].values;
        dense_forward(trace.acts.back(), w, biases_[l].values, out);
        switch (specs_[l].activation) {
        case Activation::relu: relu_inplace(out); break;
        case Activation::identity: break;
        case Activation::softmax_output: softmax_rows(out); break;
        }
        trace.acts.push_back(std::move(out));
    }
    return trace;
}

void Mlp::check_trace(const ForwardTrace& trace) const {
    if (trace.acts.size() != specs_.size() + 1)
        throw std::logic_error("backward called without a matching forward trace");
    for (std::size_t l = 0; l < specs_.size(); ++l)
        if (trace.acts[l].cols != specs_[l].in_dim ||
            trace.acts[l + 1].cols != specs_[l].out_dim ||
            trace.acts[l].rows != trace.acts[l + 1].rows)
            throw std::logic_error("forward trace does not match this network");
}

double Mlp::backward_cross_entropy(const ForwardTrace& trace, const Matrix& targets,
                                   double scale, Matrix* dx) {
    check_trace(trace);
    if (specs_.back().activation != Activation::softmax_output)
        throw std::logic_error("backward_cross_entropy needs a softmax_output final layer");
    const Matrix& probs = trace.output();
    if (targets.rows != probs.rows || targets.cols != probs.cols)
        throw std::invalid_argument("target shape does not match output");

    const double loss = scale * cross_entropy(probs, targets);

    // d(mean CE)/d(logits) = (p - y)/n for softmax + cross-entropy.
    const double inv_n = scale / static_cast<double>(probs.rows);
    Matrix delta(probs.rows, probs.cols);
    for (std::size_t k = 0; k < delta.data.size(); ++k)
        delta.data[k] = (probs.data[k] - targets.data[k]) * inv_n;

    backward_from_delta(trace, std::move(delta), specs_.size() - 1, dx);
    return loss;
}

void Mlp::backward_output_gradient(const ForwardTrace& trace, const Matrix& dout, Matrix* dx) {
    check_trace(trace);
    if (specs_.back().activation == Activation::softmax_output)
        throw std::logic_error("backward_output_gradient does not support softmax_output");
    if (dout.rows != trace.output().rows || dout.cols != trace.output().cols)
        throw std::invalid_argument("output gradient shape mismatch");
    Matrix delta = dout;
    if (specs_.back().activation == Activation::relu)
        relu_backward(trace.output(), delta);
    backward_from_delta(trace, std::move(delta), specs_.size() - 1, dx);
}

// delta arrives as d(loss)/d(pre-activation) of top_layer; walks down
// accumulating parameter grads and propagating through lower activations.
void Mlp::backward_from_delta(const ForwardTrace& trace, Matrix delta, std::size_t top_layer,
                              Matrix* dx) {
    for (std::size_t li = top_layer + 1; li-- > 0;) {
        Matrix dw;
        dw.rows = specs_[li].out_dim;
        dw.cols = specs_[li].in_dim;
        dw.data.swap(weights_[li].grad); // accumulate in place
        dense_grad_weights(delta, trace.acts[li], dw);
        weights_[li].grad.swap(dw.data);
        dense_grad_bias(delta, biases_[li].grad);

        const bool need_dx = li > 0 || dx != nullptr;
        if (!need_dx) break;

        Matrix w;
        w.rows = specs_[li].out_dim;
        w.cols = specs_[li].in_dim;
        w.data = weights_[li].values;
        Matrix down;
        dense_grad_inputs(delta, w, down);
        if (li == 0) {
            *dx = std::move(down);
            return;
        }
        if (specs_[li - 1].activation == Activation::relu)
            relu_backward(trace.acts[li], down);
        else if (specs_[li - 1].activation == Activation::softmax_output)
            throw std::logic_error("softmax_output is only supported as the final layer");
        delta = std::move(down);
    }
}

void Mlp::zero_grad() {
    for (auto& w : weights_) std::fill(w.grad.begin(), w.grad.end(), 0.0);
    for (auto& b : biases_) std::fill(b.grad.begin(), b.grad.end(), 0.0);
}

std::vector<ParamTensor*> Mlp::params() {
    std::vector<ParamTensor*> out;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const ParamTensor*> Mlp::params() const {
    std::vector<const ParamTensor*> out;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

double cross_entropy(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw std::invalid_argument("cross_entropy: shape mismatch");
    if (pred.rows == 0) throw std::invalid_argument("cross_entropy: empty batch");
    check_simplex_rows(pred, "cross_entropy pred");
    check_simplex_rows(target, "cross_entropy target");
    double total = 0.0;
    for (std::size_t n = 0; n < pred.rows; ++n) {
        double row = 0.0;
        for (std::size_t j = 0; j < pred.cols; ++j) {
            const double t = target.at(n, j);
            if (t == 0.0) continue;
            double p = pred.at(n, j);
            if (p < kLogClamp) p = kLogClamp;
            if (p > 1.0) p = 1.0;
            row -= t * std::log(p);
        }
        total += row;
    }
    return total / static_cast<double>(pred.rows);
}

SgdOptimizer::SgdOptimizer(SgdConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void SgdOptimizer::step(const std::vector<ParamTensor*>& params, int epoch) {
    const double lr = cfg_.lr_at(epoch);

    // Plain-SGD fast path: with zero momentum and decay the velocity equals
    // the gradient, so the buffers never need to exist.
    if (cfg_.momentum == 0.0 && cfg_.weight_decay == 0.0) {
        for (ParamTensor* pt : params) {
            ParamTensor& p = *pt;
            for (std::size_t k = 0; k < p.size(); ++k) {
                p.values[k] -= lr * p.grad[k];
                if (!std::isfinite(p.values[k]))
                    throw NumericError("non-finite parameter after sgd step", epoch);
            }
        }
        return;
    }

    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const ParamTensor* p : params) velocity_.emplace_back(p->size(), 0.0);
    }
    if (velocity_.size() != params.size())
        throw std::logic_error("SgdOptimizer: parameter list changed between steps");
    for (std::size_t t = 0; t < params.size(); ++t) {
        ParamTensor& p = *params[t];
        std::vector<double>& v = velocity_[t];
        if (v.size() != p.size())
            throw std::logic_error("SgdOptimizer: parameter size changed between steps");
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = cfg_.momentum * v[k] + p.grad[k] + cfg_.weight_decay * p.values[k];
            p.values[k] -= lr * v[k];
            if (!std::isfinite(p.values[k]))
                throw NumericError("non-finite parameter after sgd step", epoch);
        }
    }
}

} // namespace nllab
