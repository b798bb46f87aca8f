#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lenslab/rng.hpp"

namespace lenslab {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 as needed.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimensions");
    }

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

// Gaussian init, scaled. Draw order is row-major, so identical seeds give
// identical matrices.
inline void fill_normal(Matrix& m, SeededRng& rng, double stddev) {
    for (double& v : m.data) v = rng.normal() * stddev;
}

inline void check_finite(const Matrix& m, const std::string& what) {
    if (!m.all_finite()) throw std::invalid_argument(what + ": non-finite entries");
}

} // namespace lenslab
