#pragma once

#include "nllab/matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nllab {

// Row-stochastic class-transition matrix: t(i, j) = P(noisy = j | true = i).
struct TransitionMatrix {
    Matrix t;

    std::size_t classes() const noexcept { return t.rows; }
    double at(std::size_t i, std::size_t j) const { return t.at(i, j); }
    void validate() const; // rows sum to 1 within 1e-9, entries in [0,1]
};

enum class NoiseKind { symmetric, asymmetric, instance_dependent };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double eta = 0.4;
    // Asymmetric target map; empty means circular shift y -> (y+1) mod c.
    std::vector<int> mapping;
    // Std of the per-sample flip-rate draw for instance-dependent noise.
    double trunc_std = 0.1;
    std::uint64_t seed = 0;

    void validate(std::size_t c) const;
};

// Uniform flips: off-diagonal eta/c, diagonal 1 - eta + eta/c.
TransitionMatrix symmetric_matrix(std::size_t c, double eta);

// Class-map flips: mass eta moves from y to mapping[y].
TransitionMatrix asymmetric_matrix(std::size_t c, double eta, const std::vector<int>& mapping);

std::vector<int> circular_shift_mapping(std::size_t c);

// Samples each noisy label independently from its class row.
std::vector<int> corrupt_with_matrix(const std::vector<int>& true_labels,
                                     const TransitionMatrix& t, std::uint64_t seed);

// Feature-conditioned flips: per-sample rate q ~ N(eta, trunc_std^2)
// truncated to [0,1]; flip scores come from one shared random projection of
// the (standardized) features with the true class masked out.
std::vector<int> instance_dependent_corrupt(const Matrix& features,
                                            const std::vector<int>& true_labels,
                                            std::size_t c, double eta, std::uint64_t seed,
                                            double trunc_std = 0.1);

// Dispatch on spec.kind. Labels only; features are never touched.
std::vector<int> corrupt(const Matrix& features, const std::vector<int>& true_labels,
                         std::size_t c, const NoiseSpec& spec);

// Mean of a normal(mu, sigma) truncated to [lo, hi]; the expected flip rate
// of instance-dependent noise. Exposed for tests and docs.
double truncated_normal_mean(double mu, double sigma, double lo, double hi);

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

} // namespace nllab
