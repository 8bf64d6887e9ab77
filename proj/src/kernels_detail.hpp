#pragma once

// Per-element bodies shared by the serial and OpenMP kernels. Keeping one
// body per output element is what makes the two variants bit-identical.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"

namespace cmoe::kernels::detail {

inline void check_gram_args(const Matrix& x, std::span<const double> w, std::span<const double> y) {
  if (w.size() != x.rows() || y.size() != x.rows())
    throw Error(ErrorCode::kDimensionMismatch, "weighted_gram: weight/target length differs from rows");
}

// Upper triangle of row j of X'WX plus entry j of X'Wy, summed over samples
// in index order.
inline void gram_row(const Matrix& x, std::span<const double> w, std::span<const double> y,
                     std::size_t j, Matrix& gram, std::vector<double>& rhs) {
  const std::size_t p = x.cols();
  double b = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    const auto xi = x.row(i);
    const double wx = wi * xi[j];
    b += wx * y[i];
    for (std::size_t k = j; k < p; ++k) gram(j, k) += wx * xi[k];
  }
  rhs[j] = b;
}

inline void mirror_upper(Matrix& g) {
  for (std::size_t j = 0; j < g.rows(); ++j)
    for (std::size_t k = 0; k < j; ++k) g(j, k) = g(k, j);
}

inline void check_scores_args(const Matrix& x, const Matrix& coef) {
  if (coef.cols() != x.cols())
    throw Error(ErrorCode::kDimensionMismatch, "linear_scores: coefficient length differs from columns");
}

inline void score_column(const Matrix& x, const Matrix& coef, std::size_t i, Matrix& scores) {
  const auto xi = x.row(i);
  for (std::size_t c = 0; c < coef.rows(); ++c) {
    const auto v = coef.row(c);
    double s = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) s += xi[j] * v[j];
    scores(c, i) = s;
  }
}

inline void softmax_column(const Matrix& scores, std::size_t i, Matrix& g) {
  const std::size_t k = scores.rows();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) m = std::max(m, scores(c, i));
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double e = std::exp(scores(c, i) - m);
    g(c, i) = e;
    total += e;
  }
  for (std::size_t c = 0; c < k; ++c) g(c, i) /= total;
}

inline void check_responsibility_args(const Matrix& pi, const Matrix& gates, const Matrix& means,
                                      std::span<const double> y, std::span<const double> sigma2) {
  if (gates.rows() != pi.rows() || gates.cols() != pi.cols() || means.rows() != pi.rows() ||
      means.cols() != pi.cols() || y.size() != pi.cols() || sigma2.size() != pi.rows())
    throw Error(ErrorCode::kShapeMismatch, "responsibilities: inputs disagree on C x N");
}

// Log-space evaluation of gamma_ci = pi g p / sum_k pi g p. A zero pi or a
// gate that underflowed to zero gives an exact zero responsibility.
inline void responsibility_column(const Matrix& pi, const Matrix& gates, const Matrix& means,
                                  std::span<const double> y, std::span<const double> sigma2,
                                  std::size_t i, ResponsibilityResult& out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
  const std::size_t k = pi.rows();
  double m = kNegInf;
  for (std::size_t c = 0; c < k; ++c) {
    const double p = pi(c, i);
    const double g = gates(c, i);
    double ln = kNegInf;
    if (p > 0.0 && g > 0.0) {
      const double r = y[i] - means(c, i);
      ln = std::log(p) + std::log(g) - 0.5 * (kLogTwoPi + std::log(sigma2[c]) + r * r / sigma2[c]);
    }
    out.gamma(c, i) = ln;
    m = std::max(m, ln);
  }
  if (m == kNegInf) {
    for (std::size_t c = 0; c < k; ++c) out.gamma(c, i) = 0.0;
    out.phi[i] = 0.0;
    out.log_mix[i] = kNegInf;
    return;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double ln = out.gamma(c, i);
    const double e = ln == kNegInf ? 0.0 : std::exp(ln - m);
    out.gamma(c, i) = e;
    total += e;
  }
  double phi = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    out.gamma(c, i) /= total;
    phi += pi(c, i) * out.gamma(c, i);
  }
  out.phi[i] = phi;
  out.log_mix[i] = m + std::log(total);
}

inline void check_hat_args(const Matrix& x, std::span<const std::size_t> cols, std::span<const double> w,
                           const Matrix& inv) {
  if (w.size() != x.rows()) throw Error(ErrorCode::kDimensionMismatch, "hat_diagonal: weight length differs");
  if (inv.rows() != cols.size() || inv.cols() != cols.size())
    throw Error(ErrorCode::kDimensionMismatch, "hat_diagonal: inverse does not match active set");
  for (auto c : cols)
    if (c >= x.cols()) throw Error(ErrorCode::kIndexOutOfRange, "hat_diagonal: column out of range");
}

inline double leverage(const Matrix& x, std::span<const std::size_t> cols, std::span<const double> w,
                       const Matrix& inv, std::size_t i) {
  if (w[i] == 0.0) return 0.0;
  const auto xi = x.row(i);
  const std::size_t k = cols.size();
  double q = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    const double xa = xi[cols[a]];
    double s = 0.0;
    for (std::size_t b = 0; b < k; ++b) s += inv(a, b) * xi[cols[b]];
    q += xa * s;
  }
  return w[i] * q;
}

}  // namespace cmoe::kernels::detail
