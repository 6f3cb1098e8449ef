#include "ssfr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssfr/error.hpp"

namespace ssfr {

std::vector<double> trapezoid_weights(std::span<const double> points) {
  const std::size_t m = points.size();
  if (m < 2) throw InvalidArgument("trapezoid_weights: need at least 2 points");
  for (std::size_t r = 0; r < m; ++r) {
    if (!std::isfinite(points[r])) throw InvalidArgument("trapezoid_weights: non-finite point");
    if (r > 0 && !(points[r] > points[r - 1]))
      throw InvalidArgument("trapezoid_weights: points not strictly increasing at index " +
                            std::to_string(r));
  }
  std::vector<double> w(m);
  w[0] = 0.5 * (points[1] - points[0]);
  for (std::size_t r = 1; r + 1 < m; ++r) w[r] = 0.5 * (points[r + 1] - points[r - 1]);
  w[m - 1] = 0.5 * (points[m - 1] - points[m - 2]);
  return w;
}

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  weights_ = trapezoid_weights(points_);
}

Grid make_uniform_grid(double lo, double hi, int count) {
  if (count < 2) throw InvalidArgument("make_uniform_grid: count must be >= 2");
  if (!(lo < hi)) throw InvalidArgument("make_uniform_grid: need lo < hi");
  std::vector<double> p(static_cast<std::size_t>(count));
  const double h = (hi - lo) / (count - 1);
  for (int r = 0; r < count; ++r) p[r] = lo + h * r;
  p.back() = hi;
  return Grid(std::move(p));
}

std::vector<double> clamped_uniform_knots(double lo, double hi, int num_basis, int degree) {
  if (degree < 0) throw InvalidArgument("bspline: degree must be >= 0");
  if (num_basis < degree + 1)
    throw InvalidArgument("bspline: num_basis " + std::to_string(num_basis) +
                          " too small for degree " + std::to_string(degree));
  const int intervals = num_basis - degree;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(num_basis + degree + 1));
  for (int i = 0; i < degree; ++i) knots.push_back(lo);
  for (int i = 0; i <= intervals; ++i)
    knots.push_back(i == intervals ? hi : lo + (hi - lo) * i / intervals);
  for (int i = 0; i < degree; ++i) knots.push_back(hi);
  return knots;
}

Matrix first_difference_penalty(int num_basis) {
  if (num_basis < 1) throw InvalidArgument("penalty: num_basis must be >= 1");
  Matrix d = Matrix::Zero(num_basis - 1, num_basis);
  for (int i = 0; i + 1 < num_basis; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d.transpose() * d;
}

namespace {

// Non-zero basis functions N_{span-p..span,p}(x) by the Cox-de Boor triangle.
void nonzero_basis(const std::vector<double>& knots, int span, int degree, double x,
                   std::vector<double>& out) {
  std::vector<double> left(degree + 1), right(degree + 1);
  out.assign(degree + 1, 0.0);
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

int find_span(const std::vector<double>& knots, int num_basis, int degree, double x) {
  if (x >= knots[num_basis]) return num_basis - 1;
  // Last index i in [degree, num_basis-1] with knots[i] <= x.
  auto first = knots.begin() + degree;
  auto last = knots.begin() + num_basis + 1;
  auto it = std::upper_bound(first, last, x);
  return static_cast<int>(std::distance(knots.begin(), it)) - 1;
}

}  // namespace

BasisSystem::BasisSystem(std::vector<double> knots, int degree, const Grid& grid)
    : knots_(std::move(knots)), degree_(degree) {
  if (degree_ < 0) throw InvalidArgument("bspline: degree must be >= 0");
  num_basis_ = static_cast<int>(knots_.size()) - degree_ - 1;
  if (num_basis_ < degree_ + 1) throw InvalidArgument("bspline: knot vector too short for degree");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (knots_[i] < knots_[i - 1]) throw InvalidArgument("bspline: knots must be non-decreasing");
  lo_ = knots_[degree_];
  hi_ = knots_[num_basis_];
  if (!(lo_ < hi_)) throw InvalidArgument("bspline: empty knot domain");
  eval_ = evaluate(grid.points());
  penalty_ = first_difference_penalty(num_basis_);
}

Vector BasisSystem::evaluate_at(double x) const {
  const double tol = 1e-12 * (hi_ - lo_);
  if (!std::isfinite(x) || x < lo_ - tol || x > hi_ + tol)
    throw InvalidArgument("bspline: point " + std::to_string(x) + " outside basis domain [" +
                          std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
  x = std::clamp(x, lo_, hi_);
  Vector v = Vector::Zero(num_basis_);
  const int span = find_span(knots_, num_basis_, degree_, x);
  std::vector<double> local;
  nonzero_basis(knots_, span, degree_, x, local);
  for (int j = 0; j <= degree_; ++j) v(span - degree_ + j) = local[j];
  return v;
}

Matrix BasisSystem::evaluate(std::span<const double> points) const {
  Matrix m(num_basis_, static_cast<Index>(points.size()));
  for (std::size_t r = 0; r < points.size(); ++r) m.col(static_cast<Index>(r)) = evaluate_at(points[r]);
  return m;
}

BasisSystem bspline_basis(const Grid& grid, int num_basis, int degree) {
  return BasisSystem(clamped_uniform_knots(grid.lo(), grid.hi(), num_basis, degree), degree, grid);
}

double penalty_quadratic(const Matrix& theta, const Matrix& penalty_s, const Matrix& penalty_t,
                         double lambda_s, double lambda_t) {
  if (lambda_s < 0.0 || lambda_t < 0.0) throw InvalidArgument("penalty: negative smoothing parameter");
  if (penalty_s.rows() != theta.cols() || penalty_s.cols() != theta.cols() ||
      penalty_t.rows() != theta.rows() || penalty_t.cols() != theta.rows())
    throw InvalidArgument("penalty: shape mismatch");
  double total = 0.0;
  if (lambda_s != 0.0) total += lambda_s * (theta * penalty_s).cwiseProduct(theta).sum();
  if (lambda_t != 0.0) total += lambda_t * (penalty_t * theta).cwiseProduct(theta).sum();
  return total;
}

}  // namespace ssfr
