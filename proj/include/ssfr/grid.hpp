#pragma once

#include <span>
#include <vector>

#include "ssfr/types.hpp"

namespace ssfr {

/// Ordered evaluation points of a functional domain with composite trapezoid
/// weights. Immutable after construction.
class Grid {
 public:
  /// Throws InvalidArgument unless points are strictly increasing with length >= 2.
  explicit Grid(std::vector<double> points);

  std::span<const double> points() const { return points_; }
  std::span<const double> quad_weights() const { return weights_; }
  Eigen::Map<const Vector> weights_vector() const {
    return {weights_.data(), static_cast<Index>(weights_.size())};
  }
  std::size_t size() const { return points_.size(); }
  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }
  double length() const { return hi() - lo(); }

  friend bool operator==(const Grid& a, const Grid& b) { return a.points_ == b.points_; }

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
};

Grid make_uniform_grid(double lo, double hi, int count);

/// w_1 = (p_2 - p_1)/2, w_r = (p_{r+1} - p_{r-1})/2, w_R = (p_R - p_{R-1})/2.
std::vector<double> trapezoid_weights(std::span<const double> points);

/// Clamped uniform B-spline basis evaluated on a grid, with its first-order
/// difference penalty D^T D.
class BasisSystem {
 public:
  BasisSystem(std::vector<double> knots, int degree, const Grid& grid);

  const std::vector<double>& knots() const { return knots_; }
  int degree() const { return degree_; }
  int num_basis() const { return num_basis_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  /// K x R; column r holds every basis function at grid point r.
  const Matrix& eval_matrix() const { return eval_; }
  /// K x K.
  const Matrix& penalty() const { return penalty_; }

  /// K x m evaluation at arbitrary points inside [lo, hi].
  Matrix evaluate(std::span<const double> points) const;
  /// All K basis values at one point.
  Vector evaluate_at(double x) const;

 private:
  std::vector<double> knots_;
  int degree_;
  int num_basis_;
  double lo_;
  double hi_;
  Matrix eval_;
  Matrix penalty_;
};

/// Equally spaced interior knots on [grid.lo, grid.hi], boundary knots repeated
/// degree+1 times. Requires num_basis >= degree + 1.
BasisSystem bspline_basis(const Grid& grid, int num_basis, int degree);

/// Clamped uniform knot vector for the given domain.
std::vector<double> clamped_uniform_knots(double lo, double hi, int num_basis, int degree);

/// D^T D for the (K-1) x K first-order difference matrix D.
Matrix first_difference_penalty(int num_basis);

/// lambda_s * tr(Theta P_s Theta^T) + lambda_t * tr(Theta^T P_t Theta) for Theta (U x K).
/// The s-penalty acts across columns, the t-penalty across rows.
double penalty_quadratic(const Matrix& theta, const Matrix& penalty_s, const Matrix& penalty_t,
                         double lambda_s, double lambda_t);

}  // namespace ssfr
