#include "nllab/simplex.hpp"

#include "nllab/errors.hpp"
#include "nllab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nllab {

namespace {

void check_omega(const std::vector<double>& omega, std::size_t n) {
    if (omega.size() != n)
        throw std::invalid_argument("omega length does not match component count");
    double sum = 0.0;
    for (double w : omega) {
        if (w < -1e-9) throw std::invalid_argument("omega has a negative entry");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("omega does not sum to 1");
}

void check_components(const std::vector<Matrix>& components, const std::vector<int>& labels) {
    if (components.empty()) throw std::invalid_argument("no components");
    const std::size_t rows = components.front().rows;
    const std::size_t cols = components.front().cols;
    if (rows == 0 || rows != labels.size())
        throw std::invalid_argument("component rows must match label count");
    for (const Matrix& m : components)
        if (m.rows != rows || m.cols != cols)
            throw std::invalid_argument("components must share one shape");
    for (int y : labels)
        if (y < 0 || y >= static_cast<int>(cols))
            throw std::invalid_argument("label out of range");
}

// Gradient of empirical_risk at omega: d/d w_k = -mean_i comp_k[i][y_i] / p_i
// with p_i the (clamped) combined probability of the true class.
std::vector<double> risk_gradient(const std::vector<double>& omega,
                                  const std::vector<Matrix>& components,
                                  const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    std::vector<double> grad(omega.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        double p = 0.0;
        for (std::size_t k = 0; k < omega.size(); ++k)
            p += omega[k] * components[k].at(i, y);
        if (p < kLogClamp) p = kLogClamp;
        for (std::size_t k = 0; k < omega.size(); ++k)
            grad[k] -= components[k].at(i, y) / p;
    }
    for (double& g : grad) g /= static_cast<double>(n);
    return grad;
}

double risk_unchecked(const std::vector<double>& omega, const std::vector<Matrix>& components,
                      const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        double p = 0.0;
        for (std::size_t k = 0; k < omega.size(); ++k)
            p += omega[k] * components[k].at(i, y);
        if (p < kLogClamp) p = kLogClamp;
        if (p > 1.0) p = 1.0;
        total -= std::log(p);
    }
    return total / static_cast<double>(n);
}

} // namespace

std::vector<double> project_simplex(std::vector<double> v) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("project_simplex: non-finite input");
    if (v.empty()) throw std::invalid_argument("project_simplex: empty vector");

    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    std::size_t support = 0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        running += sorted[j];
        const double candidate = (running - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            theta = candidate;
            support = j + 1;
        }
    }
    (void)support;
    for (double& x : v) x = std::max(x - theta, 0.0);
    // Kill the residual rounding drift so downstream simplex checks at
    // 1e-12 always hold.
    double sum = 0.0;
    for (double x : v) sum += x;
    if (sum > 0.0)
        for (double& x : v) x /= sum;
    return v;
}

double empirical_risk(const std::vector<double>& omega,
                      const std::vector<Matrix>& metaval_components,
                      const std::vector<int>& clean_labels) {
    check_components(metaval_components, clean_labels);
    check_omega(omega, metaval_components.size());
    return risk_unchecked(omega, metaval_components, clean_labels);
}

SimplexWeights optimize_weights(const std::vector<Matrix>& metaval_components,
                                const std::vector<int>& clean_labels,
                                const std::vector<double>* prev_omega,
                                const SimplexSolverConfig& cfg) {
    check_components(metaval_components, clean_labels);
    const std::size_t m = metaval_components.size();
    if (prev_omega != nullptr && prev_omega->size() != m - 1)
        throw std::invalid_argument("prev_omega must have one entry fewer than the components");

    SimplexWeights best;
    best.achieved_risk = std::numeric_limits<double>::infinity();

    const auto consider = [&](const std::vector<double>& omega, WeightProvenance prov,
                              int vertex) {
        const double risk = risk_unchecked(omega, metaval_components, clean_labels);
        if (!std::isfinite(risk)) throw NumericError("non-finite combination risk");
        if (risk < best.achieved_risk) {
            best.omega = omega;
            best.achieved_risk = risk;
            best.provenance = prov;
            best.vertex_index = vertex;
        }
    };

    // Vertices first: they pin achieved_risk <= min_k risk(component k) and
    // fill component_risks as a side effect.
    best.component_risks.reserve(m);
    std::vector<double> omega(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        omega.assign(m, 0.0);
        omega[k] = 1.0;
        best.component_risks.push_back(risk_unchecked(omega, metaval_components, clean_labels));
        consider(omega, WeightProvenance::vertex, static_cast<int>(k));
    }

    // Warm start: the previous round's weights with a zero appended. When
    // the components it was optimized against are unchanged, its risk here
    // equals the previous achieved risk, which is what makes the recorded
    // risk series non-increasing.
    std::vector<double> start;
    if (prev_omega != nullptr) {
        start = *prev_omega;
        start.push_back(0.0);
        start = project_simplex(std::move(start));
        consider(start, WeightProvenance::warm_start, -1);
    } else {
        start.assign(m, 1.0 / static_cast<double>(m));
    }

    // Projected gradient descent with backtracking from the warm start.
    std::vector<double> x = start;
    double fx = risk_unchecked(x, metaval_components, clean_labels);
    for (int it = 0; it < cfg.max_iters; ++it) {
        const std::vector<double> g = risk_gradient(x, metaval_components, clean_labels);

        // Stationarity measure: distance moved by a unit-step projected step.
        std::vector<double> probe(m);
        for (std::size_t k = 0; k < m; ++k) probe[k] = x[k] - g[k];
        probe = project_simplex(std::move(probe));
        double stat = 0.0;
        for (std::size_t k = 0; k < m; ++k) stat += (probe[k] - x[k]) * (probe[k] - x[k]);
        if (std::sqrt(stat) <= cfg.grad_tol) break;

        double step = 1.0;
        bool moved = false;
        while (step > 1e-14) {
            std::vector<double> trial(m);
            for (std::size_t k = 0; k < m; ++k) trial[k] = x[k] - step * g[k];
            trial = project_simplex(std::move(trial));
            const double ft = risk_unchecked(trial, metaval_components, clean_labels);
            double decrease = 0.0;
            for (std::size_t k = 0; k < m; ++k) decrease += g[k] * (trial[k] - x[k]);
            if (ft <= fx + 1e-4 * decrease) {
                x = std::move(trial);
                fx = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    consider(x, WeightProvenance::solver, -1);

    return best;
}

Matrix combine_labels(const std::vector<double>& omega, const std::vector<Matrix>& components) {
    if (components.empty()) throw std::invalid_argument("combine_labels: no components");
    check_omega(omega, components.size());
    const std::size_t rows = components.front().rows;
    const std::size_t cols = components.front().cols;
    for (const Matrix& m : components)
        if (m.rows != rows || m.cols != cols)
            throw std::invalid_argument("combine_labels: components must share one shape");
    Matrix out(rows, cols, 0.0);
    for (std::size_t k = 0; k < components.size(); ++k) {
        const double w = omega[k];
        if (w == 0.0) continue;
        for (std::size_t idx = 0; idx < out.data.size(); ++idx)
            out.data[idx] += w * components[k].data[idx];
    }
    return out;
}

void CorrectionHistory::set_train_base(Matrix onehot_noisy) {
    if (!train_.empty()) throw std::logic_error("train base already set");
    for (double v : onehot_noisy.data)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("train base must be one-hot");
    train_.push_back(std::move(onehot_noisy));
}

void CorrectionHistory::refresh_meta_base(Matrix posterior_val) {
    if (train_.empty()) throw std::logic_error("set_train_base must run first");
    if (metaval_.empty())
        metaval_.push_back(std::move(posterior_val));
    else {
        if (posterior_val.rows != metaval_.front().rows ||
            posterior_val.cols != metaval_.front().cols)
            throw std::invalid_argument("meta base shape changed between rounds");
        metaval_.front() = std::move(posterior_val);
    }
}

void CorrectionHistory::append(Matrix train_correction, Matrix metaval_correction) {
    if (train_.empty() || metaval_.empty())
        throw std::logic_error("base components must exist before appending corrections");
    if (train_correction.rows != train_.front().rows ||
        train_correction.cols != train_.front().cols)
        throw std::invalid_argument("train correction shape mismatch");
    if (metaval_correction.rows != metaval_.front().rows ||
        metaval_correction.cols != metaval_.front().cols)
        throw std::invalid_argument("meta correction shape mismatch");
    train_.push_back(std::move(train_correction));
    metaval_.push_back(std::move(metaval_correction));
}

std::size_t CorrectionHistory::truncate(std::size_t cap) {
    if (cap == 0 || corrections() <= cap) return 0;
    const std::size_t drop = corrections() - cap;
    train_.erase(train_.begin() + 1, train_.begin() + 1 + static_cast<std::ptrdiff_t>(drop));
    metaval_.erase(metaval_.begin() + 1, metaval_.begin() + 1 + static_cast<std::ptrdiff_t>(drop));
    return drop;
}

void CorrectionHistory::validate() const {
    if (train_.size() != metaval_.size())
        throw std::logic_error("history train/metaval lengths differ");
    for (const Matrix& m : train_)
        for (std::size_t r = 0; r < m.rows; ++r) {
            double sum = 0.0;
            for (double v : m.row(r)) sum += v;
            if (std::abs(sum - 1.0) > 1e-9)
                throw NumericError("history train component row off simplex");
        }
    for (const Matrix& m : metaval_)
        for (std::size_t r = 0; r < m.rows; ++r) {
            double sum = 0.0;
            for (double v : m.row(r)) sum += v;
            if (std::abs(sum - 1.0) > 1e-9)
                throw NumericError("history metaval component row off simplex");
        }
}

const char* to_string(WeightProvenance p) {
    switch (p) {
    case WeightProvenance::solver: return "solver";
    case WeightProvenance::vertex: return "vertex";
    case WeightProvenance::warm_start: return "warm_start";
    }
    return "unknown";
}

} // namespace nllab
