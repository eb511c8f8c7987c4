#pragma once

#include "nllab/matrix.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nllab {

// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> project_simplex(std::vector<double> v);

// Mean cross-entropy on the meta-val set of the omega-weighted component
// mix against the one-hot clean labels. omega must sit on the simplex.
double empirical_risk(const std::vector<double>& omega,
                      const std::vector<Matrix>& metaval_components,
                      const std::vector<int>& clean_labels);

struct SimplexSolverConfig {
    int max_iters = 500;
    double grad_tol = 1e-8;
};

enum class WeightProvenance { solver, vertex, warm_start };

struct SimplexWeights {
    std::vector<double> omega;
    double achieved_risk = 0.0;
    WeightProvenance provenance = WeightProvenance::solver;
    int vertex_index = -1; // set when provenance == vertex
    std::vector<double> component_risks;
};

// Minimizes empirical_risk over the simplex with projected gradient descent
// plus a backtracking line search, then returns the best of {solver result,
// every vertex e_k, the warm start [prev_omega || 0]}. The candidate set is
// what makes the risk guarantees hold exactly, whatever the solver does:
// the winner is never worse than any single component, and never worse than
// the previous round's weights extended by a zero.
SimplexWeights optimize_weights(const std::vector<Matrix>& metaval_components,
                                const std::vector<int>& clean_labels,
                                const std::vector<double>* prev_omega,
                                const SimplexSolverConfig& cfg = {});

// Per-sample convex combination sum_k omega[k] * components[k].
Matrix combine_labels(const std::vector<double>& omega, const std::vector<Matrix>& components);

// Correction component history for one run. Index 0 is the base component:
// the fixed one-hot noisy labels on the train side, and the latest simulated
// noisy posterior on the meta-val side. Indices 1..K are frozen corrector
// outputs, one per accepted round.
class CorrectionHistory {
public:
    void set_train_base(Matrix onehot_noisy);

    // Replaces the meta-val base with a fresh posterior. Callers may keep
    // the previous base around to restore when a refresh would break the
    // round-over-round risk guarantee.
    void refresh_meta_base(Matrix posterior_val);

    void append(Matrix train_correction, Matrix metaval_correction);

    // Drops the oldest non-base component until at most cap corrections
    // remain. Returns how many were dropped. With a cap the warm start no
    // longer reproduces the previous round, so the monotone-risk guarantee
    // is off; the default configuration never truncates.
    std::size_t truncate(std::size_t cap);

    std::size_t components() const noexcept { return train_.size(); }
    std::size_t corrections() const noexcept { return train_.empty() ? 0 : train_.size() - 1; }

    const std::vector<Matrix>& train_components() const noexcept { return train_; }
    const std::vector<Matrix>& metaval_components() const noexcept { return metaval_; }
    const Matrix& meta_base() const { return metaval_.front(); }

    void validate() const;

private:
    std::vector<Matrix> train_;
    std::vector<Matrix> metaval_;
};

const char* to_string(WeightProvenance p);

} // namespace nllab
