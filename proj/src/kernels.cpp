#include "lenslab/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace lenslab::kernels {

// The lane sums carry independent dependency chains, so the loop vectorizes
// without reassociation. noinline keeps every caller — parallel kernels,
// reference kernels, attention — on one machine-code instance, making their
// outputs bit-identical.
__attribute__((noinline)) double dot(const double* a, const double* b, int k) {
    double lane[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    int p = 0;
    for (; p + 8 <= k; p += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[p + l] * b[p + l];
    double tail = 0.0;
    for (; p < k; ++p) tail += a[p] * b[p];
    const double s01 = lane[0] + lane[1];
    const double s23 = lane[2] + lane[3];
    const double s45 = lane[4] + lane[5];
    const double s67 = lane[6] + lane[7];
    return ((s01 + s23) + (s45 + s67)) + tail;
}

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.cols) c = Matrix(a.rows, b.cols);
    const int m = a.rows, k = a.cols, n = b.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.rows) c = Matrix(a.rows, b.rows);
    const int m = a.rows, k = a.cols, n = b.rows;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = dot(ai, b.row(j), k);
    }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt_acc: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.rows)
        throw std::invalid_argument("matmul_nt_acc: output shape mismatch");
    const int m = a.rows, k = a.cols, n = b.rows;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] += dot(ai, b.row(j), k);
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
    if (c.rows != a.cols || c.cols != b.cols) c = Matrix(a.cols, b.cols);
    const int m = a.cols, k = a.rows, n = b.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double av = a(p, i);
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn_acc: inner dimension mismatch");
    if (c.rows != a.cols || c.cols != b.cols)
        throw std::invalid_argument("matmul_tn_acc: output shape mismatch");
    const int m = a.cols, k = a.rows, n = b.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = a(p, i);
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void rmsnorm_rows(const Matrix& x, const std::vector<double>& gain, Matrix& y,
                  std::vector<double>& rms) {
    const int n = x.rows, d = x.cols;
    if (static_cast<int>(gain.size()) != d)
        throw std::invalid_argument("rmsnorm_rows: gain length mismatch");
    if (y.rows != n || y.cols != d) y = Matrix(n, d);
    rms.resize(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double ss = 0.0;
        for (int j = 0; j < d; ++j) ss += xi[j] * xi[j];
        const double r = std::sqrt(ss / d + kRmsEps);
        rms[i] = r;
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) yi[j] = xi[j] * gain[j] / r;
    }
}

void rmsnorm_backward_rows(const Matrix& x, const std::vector<double>& rms,
                           const std::vector<double>& gain, const Matrix& dy, Matrix& dx_acc,
                           double* dgain_acc) {
    const int n = x.rows, d = x.cols;
    if (dx_acc.rows != n || dx_acc.cols != d)
        throw std::invalid_argument("rmsnorm_backward_rows: dx shape mismatch");
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        double* dxi = dx_acc.row(i);
        const double r = rms[i];
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += dyi[j] * gain[j] * xi[j];
        const double sr3 = s / (d * r * r * r);
        for (int j = 0; j < d; ++j) dxi[j] += gain[j] * dyi[j] / r - xi[j] * sr3;
    }
    if (dgain_acc != nullptr) {
        for (int i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            const double* dyi = dy.row(i);
            const double r = rms[i];
            for (int j = 0; j < d; ++j) dgain_acc[j] += dyi[j] * xi[j] / r;
        }
    }
}

namespace ref {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.cols) c = Matrix(a.rows, b.cols);
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.rows) c = Matrix(a.rows, b.rows);
    const int m = a.rows, k = a.cols, n = b.rows;
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = dot(ai, b.row(j), k);
    }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt_acc: inner dimension mismatch");
    if (c.rows != a.rows || c.cols != b.rows)
        throw std::invalid_argument("matmul_nt_acc: output shape mismatch");
    const int m = a.rows, k = a.cols, n = b.rows;
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] += dot(ai, b.row(j), k);
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
    if (c.rows != a.cols || c.cols != b.cols) c = Matrix(a.cols, b.cols);
    const int m = a.cols, k = a.rows, n = b.cols;
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double av = a(p, i);
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn_acc: inner dimension mismatch");
    if (c.rows != a.cols || c.cols != b.cols)
        throw std::invalid_argument("matmul_tn_acc: output shape mismatch");
    const int m = a.cols, k = a.rows, n = b.cols;
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = a(p, i);
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void rmsnorm_rows(const Matrix& x, const std::vector<double>& gain, Matrix& y,
                  std::vector<double>& rms) {
    const int n = x.rows, d = x.cols;
    if (static_cast<int>(gain.size()) != d)
        throw std::invalid_argument("rmsnorm_rows: gain length mismatch");
    if (y.rows != n || y.cols != d) y = Matrix(n, d);
    rms.resize(n);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double ss = 0.0;
        for (int j = 0; j < d; ++j) ss += xi[j] * xi[j];
        const double r = std::sqrt(ss / d + kRmsEps);
        rms[i] = r;
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) yi[j] = xi[j] * gain[j] / r;
    }
}

void rmsnorm_backward_rows(const Matrix& x, const std::vector<double>& rms,
                           const std::vector<double>& gain, const Matrix& dy, Matrix& dx_acc,
                           double* dgain_acc) {
    const int n = x.rows, d = x.cols;
    if (dx_acc.rows != n || dx_acc.cols != d)
        throw std::invalid_argument("rmsnorm_backward_rows: dx shape mismatch");
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        double* dxi = dx_acc.row(i);
        const double r = rms[i];
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += dyi[j] * gain[j] * xi[j];
        const double sr3 = s / (d * r * r * r);
        for (int j = 0; j < d; ++j) dxi[j] += gain[j] * dyi[j] / r - xi[j] * sr3;
    }
    if (dgain_acc != nullptr) {
        for (int i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            const double* dyi = dy.row(i);
            const double r = rms[i];
            for (int j = 0; j < d; ++j) dgain_acc[j] += dyi[j] * xi[j] / r;
        }
    }
}

} // namespace ref

} // namespace lenslab::kernels
