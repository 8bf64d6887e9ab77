#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"
#include "kernels_detail.hpp"

namespace cmoe::kernels::serial {

WeightedGram weighted_gram(const Matrix& x, std::span<const double> w, std::span<const double> y) {
  detail::check_gram_args(x, w, y);
  const std::size_t p = x.cols();
  WeightedGram out{Matrix(p, p), std::vector<double>(p, 0.0)};
  for (std::size_t j = 0; j < p; ++j) detail::gram_row(x, w, y, j, out.gram, out.rhs);
  detail::mirror_upper(out.gram);
  return out;
}

Matrix linear_scores(const Matrix& x, const Matrix& coef) {
  detail::check_scores_args(x, coef);
  Matrix scores(coef.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) detail::score_column(x, coef, i, scores);
  return scores;
}

Matrix softmax_columns(const Matrix& scores) {
  Matrix g(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.cols(); ++i) detail::softmax_column(scores, i, g);
  return g;
}

ResponsibilityResult responsibilities(const Matrix& pi, const Matrix& gates, const Matrix& means,
                                      std::span<const double> y, std::span<const double> sigma2) {
  detail::check_responsibility_args(pi, gates, means, y, sigma2);
  const std::size_t n = pi.cols();
  ResponsibilityResult out{Matrix(pi.rows(), n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) detail::responsibility_column(pi, gates, means, y, sigma2, i, out);
  return out;
}

std::vector<double> hat_diagonal(const Matrix& x, std::span<const std::size_t> cols,
                                 std::span<const double> w, const Matrix& gram_inverse) {
  detail::check_hat_args(x, cols, w, gram_inverse);
  std::vector<double> h(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) h[i] = detail::leverage(x, cols, w, gram_inverse, i);
  return h;
}

}  // namespace cmoe::kernels::serial
