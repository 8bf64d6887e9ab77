#pragma once

// Possibility distributions that encode analyst knowledge about which
// operating context each sample belongs to.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmoe/error.hpp"
#include "cmoe/linalg.hpp"

namespace cmoe {

// pi(c, i) in [0, 1]: degree to which sample i may belong to context c.
class ContextMatrix {
 public:
  ContextMatrix() = default;
  // Validates entries; rows whose maximum is below 1 are logged as warnings.
  ContextMatrix(Matrix pi, std::vector<std::string> labels);

  static ContextMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                 std::vector<std::string> labels);

  std::size_t n_contexts() const noexcept { return pi_.rows(); }
  std::size_t n_samples() const noexcept { return pi_.cols(); }
  const Matrix& pi() const noexcept { return pi_; }
  double operator()(std::size_t c, std::size_t i) const { return pi_(c, i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // Contexts whose row does not reach 1 anywhere.
  std::vector<std::size_t> unnormalized_rows() const;

  // Keeps only the listed sample columns (used to follow row drops in the
  // data pipeline).
  ContextMatrix select_samples(std::span<const std::size_t> samples) const;

 private:
  Matrix pi_;
  std::vector<std::string> labels_;
};

// "A is certain to degree alpha".
struct AlphaCertainSpec {
  std::vector<std::size_t> member_set;
  double alpha = 1.0;
};

struct TrapezoidSpec {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double beta = 0.0;
};

std::vector<double> alpha_certain(const AlphaCertainSpec& spec, std::size_t n_samples);

// Trapezoid membership evaluated at each position, floored at beta.
std::vector<double> beta_trapezoid(const TrapezoidSpec& spec, std::span<const double> positions);

// Pure trapezoid shape (no floor); used to build multi-peak and complementary
// distributions.
double trapezoid_membership(const TrapezoidSpec& spec, double position);

std::vector<double> complete_ignorance(std::size_t n_samples);

struct ConsistencyIndex {
  std::vector<double> per_context;
  double overall = 0.0;
};

// Fraction of samples where the gate probability does not exceed the
// possibility, per context, and the geometric mean across contexts.
// gates is C x N like the context matrix.
ConsistencyIndex consistency_index(const Matrix& gates, const ContextMatrix& ctx);

struct TunePoint {
  double certainty = 0.0;
  double cv_error = 0.0;
  double consistency = 0.0;
  bool failed = false;
};

struct TuneResult {
  std::size_t selected = 0;
  double certainty = 0.0;
  std::vector<TunePoint> table;
};

class NoFeasiblePoint : public Error {
 public:
  NoFeasiblePoint(const std::string& what, std::vector<TunePoint> table)
      : Error(ErrorCode::kNoFeasiblePoint, what), table_(std::move(table)) {}
  const std::vector<TunePoint>& table() const noexcept { return table_; }

 private:
  std::vector<TunePoint> table_;
};

// Evaluates fit_fn at every grid certainty (concurrently when threads allow)
// and picks the lowest cv_error among points with consistency >= epsilon.
// Ties go to the lower certainty. fit_fn must be safe to call concurrently.
using CertaintyFitFn = std::function<TunePoint(double certainty)>;
TuneResult tune_certainty(std::span<const double> grid, const CertaintyFitFn& fit_fn, double epsilon);

}  // namespace cmoe
