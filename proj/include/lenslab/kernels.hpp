#pragma once

#include <vector>

#include "lenslab/tensor.hpp"

namespace lenslab::kernels {

// Epsilon inside the RMS normalizer r = sqrt(mean(x^2) + eps).
inline constexpr double kRmsEps = 1e-8;

// Dot product with eight explicit partial sums and a fixed reduction tree, so
// it vectorizes under strict floating-point semantics. The summation order is
// part of the numeric contract; a single shared machine-code instance serves
// the NT matmuls, attention, and any other caller, keeping results
// bit-reproducible across call sites.
double dot(const double* a, const double* b, int k);

// OpenMP-parallel dense kernels. Work is split over output rows only and
// every output element is produced by one thread with the same inner-loop
// order as the serial reference, so results are bit-identical to
// kernels::ref for any thread count.

// C = A * B            (m x k) * (k x n) -> (m x n)
void matmul(const Matrix& a, const Matrix& b, Matrix& c);

// C = A * B^T          (m x k) * (n x k) -> (m x n)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

// C += A * B^T         accumulating variant used for gradient sums
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);

// C = A^T * B          (k x m) * (k x n) -> (m x n)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);

// C += A^T * B         accumulating variant used for gradient sums
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);

// y_ij = x_ij * gain_j / r_i with r_i = sqrt(mean_j x_ij^2 + kRmsEps); rms
// receives the per-row r. y and rms are resized as needed.
void rmsnorm_rows(const Matrix& x, const std::vector<double>& gain, Matrix& y,
                  std::vector<double>& rms);

// Accumulates dL/dx into dx_acc given upstream dy = dL/dy:
//   dx_ij += gain_j dy_ij / r_i - x_ij * S_i / (d r_i^3),
//   S_i = sum_j dy_ij gain_j x_ij.
// When dgain_acc is non-null it also accumulates dgain_j += dy_ij x_ij / r_i,
// summed serially over rows so results are thread-count independent.
void rmsnorm_backward_rows(const Matrix& x, const std::vector<double>& rms,
                           const std::vector<double>& gain, const Matrix& dy, Matrix& dx_acc,
                           double* dgain_acc);

namespace ref {

// Serial reference implementations, kept for testing and benchmarking.
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);
void rmsnorm_rows(const Matrix& x, const std::vector<double>& gain, Matrix& y,
                  std::vector<double>& rms);
void rmsnorm_backward_rows(const Matrix& x, const std::vector<double>& rms,
                           const std::vector<double>& gain, const Matrix& dy, Matrix& dx_acc,
                           double* dgain_acc);

} // namespace ref

} // namespace lenslab::kernels
