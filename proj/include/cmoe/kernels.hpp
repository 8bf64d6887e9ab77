#pragma once

// Data-parallel inner loops of the trainer. Every kernel exists twice: a plain
// serial reference (kept for testing and benchmarking) and an OpenMP version.
// Both sum in the same order per output element, so their results are
// bit-identical regardless of thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "cmoe/linalg.hpp"

namespace cmoe::kernels {

// Weighted normal equations: gram = X' W X, rhs = X' W y.
struct WeightedGram {
  Matrix gram;
  std::vector<double> rhs;
};

// Output of the responsibility kernel. gamma is C x N, phi and log_mix are
// length N. log_mix_i = log sum_c pi_ci g_ci p_ci.
struct ResponsibilityResult {
  Matrix gamma;
  std::vector<double> phi;
  std::vector<double> log_mix;
};

// Rows below this count run serially even through the OpenMP entry points.
inline constexpr std::size_t kParallelThreshold = 512;

namespace serial {

WeightedGram weighted_gram(const Matrix& x, std::span<const double> w, std::span<const double> y);

// scores(c, i) = x_i' coef_c for coef given as C x p rows.
Matrix linear_scores(const Matrix& x, const Matrix& coef);

// Column-wise softmax of a C x N score matrix.
Matrix softmax_columns(const Matrix& scores);

ResponsibilityResult responsibilities(const Matrix& pi, const Matrix& gates, const Matrix& means,
                                      std::span<const double> y, std::span<const double> sigma2);

std::vector<double> hat_diagonal(const Matrix& x, std::span<const std::size_t> cols,
                                 std::span<const double> w, const Matrix& gram_inverse);

}  // namespace serial

namespace omp {

WeightedGram weighted_gram(const Matrix& x, std::span<const double> w, std::span<const double> y);
Matrix linear_scores(const Matrix& x, const Matrix& coef);
Matrix softmax_columns(const Matrix& scores);
ResponsibilityResult responsibilities(const Matrix& pi, const Matrix& gates, const Matrix& means,
                                      std::span<const double> y, std::span<const double> sigma2);
std::vector<double> hat_diagonal(const Matrix& x, std::span<const std::size_t> cols,
                                 std::span<const double> w, const Matrix& gram_inverse);

}  // namespace omp

// Default entry points used by the library.
using omp::hat_diagonal;
using omp::linear_scores;
using omp::responsibilities;
using omp::softmax_columns;
using omp::weighted_gram;

// Caps the worker count used by the OpenMP kernels (0 = runtime default).
void set_max_threads(int threads);
int max_threads();

}  // namespace cmoe::kernels
