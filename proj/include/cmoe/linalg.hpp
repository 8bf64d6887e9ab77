#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cmoe {

// Dense row-major matrix of doubles. Just enough surface for the trainers;
// anything heavier belongs in a real BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> column(std::size_t j) const;

  const std::vector<double>& values() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix multiply(const Matrix& a, const Matrix& b);
std::vector<double> multiply(const Matrix& a, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

// Columns `cols` of `a`, in the given order.
Matrix select_columns(const Matrix& a, std::span<const std::size_t> cols);
// Rows `rows` of `a`, in the given order.
Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows);

// LU factorization with partial pivoting. Throws SingularMatrix when a pivot
// magnitude falls below kPivotTolerance.
class LuFactorization {
 public:
  static constexpr double kPivotTolerance = 1e-12;

  explicit LuFactorization(Matrix a);

  std::size_t size() const noexcept { return lu_.rows(); }
  Matrix solve(const Matrix& b) const;
  std::vector<double> solve(std::span<const double> b) const;
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

Matrix lu_solve(const Matrix& a, const Matrix& b);
std::vector<double> lu_solve(const Matrix& a, std::span<const double> b);

// Diagonal of H = Xs (Xs' W Xs)^-1 Xs' W, i.e. h_i = w_i x_i' (Xs' W Xs)^-1 x_i.
// The N x N hat matrix is never formed.
std::vector<double> hat_diagonal(const Matrix& xs, std::span<const double> w);

// Same diagonal for the columns `cols` of `x`, given the already-inverted
// k x k weighted Gram block of those columns.
std::vector<double> hat_diagonal(const Matrix& x, std::span<const std::size_t> cols,
                                 std::span<const double> w, const Matrix& gram_inverse);

}  // namespace cmoe
