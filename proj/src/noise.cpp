#include "nllab/noise.hpp"

#include "nllab/errors.hpp"
#include "nllab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nllab {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void check_eta(double eta) {
    require(eta >= 0.0 && eta <= 1.0, "eta must be in [0,1]");
}

int sample_from_row(std::span<const double> row, double u) {
    double cum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        cum += row[j];
        if (u < cum) return static_cast<int>(j);
    }
    return static_cast<int>(row.size()) - 1; // u landed in rounding slack
}

} // namespace

void TransitionMatrix::validate() const {
    require(t.rows >= 2 && t.rows == t.cols, "transition matrix must be square, c >= 2");
    for (std::size_t i = 0; i < t.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < t.cols; ++j) {
            const double v = t.at(i, j);
            require(v >= 0.0 && v <= 1.0, "transition entries must be in [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("transition matrix row does not sum to 1");
    }
}

void NoiseSpec::validate(std::size_t c) const {
    check_eta(eta);
    require(trunc_std >= 0.0, "trunc_std must be nonnegative");
    if (!mapping.empty()) {
        require(mapping.size() == c, "asymmetric mapping must be total over classes");
        for (int m : mapping)
            require(m >= 0 && m < static_cast<int>(c), "asymmetric mapping out of range");
    }
}

TransitionMatrix symmetric_matrix(std::size_t c, double eta) {
    require(c >= 2, "symmetric_matrix: c must be >= 2");
    check_eta(eta);
    TransitionMatrix out;
    out.t = Matrix(c, c, eta / static_cast<double>(c));
    for (std::size_t i = 0; i < c; ++i)
        out.t.at(i, i) = 1.0 - eta + eta / static_cast<double>(c);
    out.validate();
    return out;
}

TransitionMatrix asymmetric_matrix(std::size_t c, double eta, const std::vector<int>& mapping) {
    require(c >= 2, "asymmetric_matrix: c must be >= 2");
    check_eta(eta);
    require(mapping.size() == c, "asymmetric_matrix: mapping must be total over classes");
    for (int m : mapping)
        require(m >= 0 && m < static_cast<int>(c), "asymmetric_matrix: mapping out of range");
    TransitionMatrix out;
    out.t = Matrix(c, c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        out.t.at(i, i) = 1.0 - eta;
        out.t.at(i, static_cast<std::size_t>(mapping[i])) += eta;
    }
    out.validate();
    return out;
}

std::vector<int> circular_shift_mapping(std::size_t c) {
    std::vector<int> m(c);
    for (std::size_t i = 0; i < c; ++i) m[i] = static_cast<int>((i + 1) % c);
    return m;
}

std::vector<int> corrupt_with_matrix(const std::vector<int>& true_labels,
                                     const TransitionMatrix& t, std::uint64_t seed) {
    t.validate();
    Rng rng(seed);
    std::vector<int> out;
    out.reserve(true_labels.size());
    for (int y : true_labels) {
        require(y >= 0 && y < static_cast<int>(t.classes()), "label out of range");
        out.push_back(sample_from_row(t.t.row(static_cast<std::size_t>(y)), rng.uniform()));
    }
    return out;
}

std::vector<int> instance_dependent_corrupt(const Matrix& features,
                                            const std::vector<int>& true_labels,
                                            std::size_t c, double eta, std::uint64_t seed,
                                            double trunc_std) {
    require(features.rows == true_labels.size(), "feature/label count mismatch");
    require(c >= 2, "instance_dependent_corrupt: c must be >= 2");
    check_eta(eta);
    require(trunc_std >= 0.0, "trunc_std must be nonnegative");

    Rng rng(seed);

    // Per-sample flip rates first, then the shared projection, so the draw
    // order is easy to reason about when reproducing runs.
    std::vector<double> q(features.rows);
    for (double& qi : q) {
        if (trunc_std == 0.0) {
            qi = std::min(std::max(eta, 0.0), 1.0);
            continue;
        }
        double draw = rng.normal(eta, trunc_std);
        while (draw < 0.0 || draw > 1.0) draw = rng.normal(eta, trunc_std);
        qi = draw;
    }

    Matrix proj(features.cols, c);
    for (double& v : proj.data) v = rng.normal();

    std::vector<int> out(features.rows);
    std::vector<double> p(c);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const int y = true_labels[i];
        if (q[i] == 0.0) {
            out[i] = y;
            rng.uniform(); // keep the stream aligned across q values
            continue;
        }
        // scores = x_i * proj with the true class masked out of the softmax
        double mx = -1e300;
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < features.cols; ++k)
                s += features.at(i, k) * proj.at(k, j);
            p[j] = s;
            if (static_cast<int>(j) != y && s > mx) mx = s;
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (static_cast<int>(j) == y) {
                p[j] = 0.0;
                continue;
            }
            p[j] = std::exp(p[j] - mx);
            denom += p[j];
        }
        for (std::size_t j = 0; j < c; ++j) p[j] *= q[i] / denom;
        p[static_cast<std::size_t>(y)] = 1.0 - q[i];
        out[i] = sample_from_row(p, rng.uniform());
    }
    return out;
}

std::vector<int> corrupt(const Matrix& features, const std::vector<int>& true_labels,
                         std::size_t c, const NoiseSpec& spec) {
    spec.validate(c);
    switch (spec.kind) {
    case NoiseKind::symmetric:
        return corrupt_with_matrix(true_labels, symmetric_matrix(c, spec.eta), spec.seed);
    case NoiseKind::asymmetric: {
        const auto mapping = spec.mapping.empty() ? circular_shift_mapping(c) : spec.mapping;
        return corrupt_with_matrix(true_labels, asymmetric_matrix(c, spec.eta, mapping),
                                   spec.seed);
    }
    case NoiseKind::instance_dependent:
        return instance_dependent_corrupt(features, true_labels, c, spec.eta, spec.seed,
                                          spec.trunc_std);
    }
    throw std::logic_error("unreachable noise kind");
}

double truncated_normal_mean(double mu, double sigma, double lo, double hi) {
    if (sigma == 0.0) return std::min(std::max(mu, lo), hi);
    const auto phi = [](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    };
    const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    return mu + sigma * (phi(a) - phi(b)) / (cdf(b) - cdf(a));
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::symmetric: return "symmetric";
    case NoiseKind::asymmetric: return "asymmetric";
    case NoiseKind::instance_dependent: return "instance_dependent";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "symmetric") return NoiseKind::symmetric;
    if (s == "asymmetric") return NoiseKind::asymmetric;
    if (s == "instance_dependent") return NoiseKind::instance_dependent;
    throw ConfigError("noise_kind", "unknown noise kind '" + s + "'");
}

} // namespace nllab
