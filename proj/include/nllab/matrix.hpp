#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nllab {

// Row-major dense matrix of 64-bit reals. Value semantics throughout; all
// numeric state in the project lives in these or in plain vectors.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const noexcept { return data.empty(); }

    bool all_finite() const noexcept {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Argmax with ties broken toward the lowest index, so evaluation metrics
// are deterministic.
inline std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

// Gathers the given rows of src into a new matrix, in index order.
inline Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), src.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto r = src.row(idx[i]);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

inline Matrix one_hot_rows(std::span<const int> labels, std::size_t c) {
    Matrix out(labels.size(), c, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return out;
}

} // namespace nllab
