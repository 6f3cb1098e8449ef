#include "ssfr/structured.hpp"

#include <algorithm>
#include <Eigen/Eigenvalues>
#include <string>

#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace ssfr {

void StructuredPart::validate() const {
  if (!t_basis) throw InvalidArgument("structured part: missing outcome basis");
  const int u_dim = t_basis->num_basis();
  if (intercept.size() != u_dim) throw InvalidArgument("structured part: intercept length differs from U");
  if (!intercept.allFinite()) throw InvalidArgument("structured part: non-finite intercept");
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto& t = terms[j];
    if (!t.s_basis) throw InvalidArgument("structured term " + std::to_string(j) + ": missing basis");
    if (t.theta.rows() != u_dim || t.theta.cols() != t.s_basis->num_basis())
      throw InvalidArgument("structured term " + std::to_string(j) + ": theta shape does not match bases");
    if (!t.theta.allFinite()) throw InvalidArgument("structured term " + std::to_string(j) + ": non-finite theta");
  }
}

std::shared_ptr<const BasisSystem> BasisCache::get(const Grid& grid, int num_basis, int degree) {
  const auto pts = grid.points();
  for (const auto& e : entries_)
    if (e.num_basis == num_basis && e.degree == degree && std::ranges::equal(e.points, pts)) return e.basis;
  auto basis = std::make_shared<const BasisSystem>(bspline_basis(grid, num_basis, degree));
  entries_.push_back({std::vector<double>(pts.begin(), pts.end()), num_basis, degree, basis});
  return basis;
}

Vector encode(std::span<const double> x_row, const Grid& grid, const BasisSystem& s_basis) {
  if (x_row.size() != grid.size() || s_basis.eval_matrix().cols() != static_cast<Index>(grid.size()))
    throw InvalidArgument("encode: length mismatch");
  const auto w = grid.quad_weights();
  const Matrix& phi = s_basis.eval_matrix();
  Vector out = Vector::Zero(phi.rows());
  for (Index k = 0; k < phi.rows(); ++k) {
    double acc = 0.0;
    for (std::size_t r = 0; r < x_row.size(); ++r) acc += w[r] * phi(k, static_cast<Index>(r)) * x_row[r];
    out(k) = acc;
  }
  return out;
}

RowMatrix encode_rows(const RowMatrix& x, const Grid& grid, const BasisSystem& s_basis) {
  if (x.cols() != static_cast<Index>(grid.size()) || s_basis.eval_matrix().cols() != x.cols())
    throw InvalidArgument("encode_rows: length mismatch");
  return kernels::encode_rows(x, grid.quad_weights(), s_basis.eval_matrix());
}

std::vector<RowMatrix> encode_terms(const StructuredPart& part, const FunctionalDataset& ds) {
  std::vector<RowMatrix> out;
  out.reserve(part.terms.size());
  for (const auto& t : part.terms) {
    if (t.predictor_index >= ds.num_predictors())
      throw InvalidArgument("encode_terms: term refers to missing predictor");
    out.push_back(encode_rows(ds.predictors[t.predictor_index], ds.predictor_grids[t.predictor_index], *t.s_basis));
  }
  return out;
}

RowVector term_forward(const Vector& encoded, const Matrix& theta, const Matrix& t_eval) {
  if (encoded.size() != theta.cols() || theta.rows() != t_eval.rows())
    throw InvalidArgument("term_forward: shape mismatch");
  const Vector latent = theta * encoded;
  return latent.transpose() * t_eval;
}

RowMatrix structured_forward(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                             const Matrix& t_eval, Index n) {
  if (encoded.size() != part.terms.size()) throw InvalidArgument("structured_forward: one encoding per term required");
  if (t_eval.rows() != part.intercept.size()) throw InvalidArgument("structured_forward: t_eval rows differ from U");
  if (n < 0) {
    if (encoded.empty()) throw InvalidArgument("structured_forward: row count unknown without terms");
    n = encoded.front().rows();
  }
  for (const auto& e : encoded)
    if (e.rows() != n) throw InvalidArgument("structured_forward: row counts differ across terms");
  RowMatrix out(n, t_eval.cols());
  out.rowwise() = part.intercept.transpose() * t_eval;
  for (std::size_t j = 0; j < encoded.size(); ++j)
    kernels::decode_add(encoded[j], part.terms[j].theta, t_eval, out);
  return out;
}

RowMatrix structured_forward(const StructuredPart& part, const std::vector<RowMatrix>& encoded, Index n) {
  return structured_forward(part, encoded, part.t_basis->eval_matrix(), n);
}

RowMatrix surface(const Matrix& theta, const BasisSystem& s_basis, const BasisSystem& t_basis,
                  std::span<const double> s_points, std::span<const double> t_points) {
  if (theta.rows() != t_basis.num_basis() || theta.cols() != s_basis.num_basis())
    throw InvalidArgument("surface: theta shape does not match bases");
  const Matrix phi = s_basis.evaluate(s_points);  // K x S
  const Matrix psi = t_basis.evaluate(t_points);  // U x T
  RowMatrix out = phi.transpose() * theta.transpose() * psi;
  return out;
}

double structured_penalty(const StructuredPart& part, const SmoothingParams& smoothing) {
  if (smoothing.lambda_s < 0.0 || smoothing.lambda_t < 0.0)
    throw InvalidArgument("penalty: negative smoothing parameter");
  const Matrix& pt = part.t_basis->penalty();
  double total = smoothing.lambda_t * part.intercept.dot(pt * part.intercept);
  for (const auto& t : part.terms)
    total += penalty_quadratic(t.theta, t.s_basis->penalty(), pt, smoothing.lambda_s, smoothing.lambda_t);
  return total;
}

StructuredGradients structured_gradients(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                                         const Matrix& t_eval, const RowMatrix& upstream,
                                         const SmoothingParams& smoothing) {
  if (encoded.size() != part.terms.size()) throw InvalidArgument("structured_gradients: one encoding per term required");
  if (upstream.cols() != t_eval.cols() || t_eval.rows() != part.intercept.size())
    throw InvalidArgument("structured_gradients: shape mismatch");
  for (const auto& e : encoded)
    if (e.rows() != upstream.rows()) throw InvalidArgument("structured_gradients: row count mismatch");
  const Matrix& pt = part.t_basis->penalty();
  StructuredGradients g;
  const RowVector col_sums = upstream.colwise().sum();
  g.intercept = t_eval * col_sums.transpose() + 2.0 * smoothing.lambda_t * (pt * part.intercept);
  g.terms.reserve(part.terms.size());
  for (std::size_t j = 0; j < part.terms.size(); ++j) {
    const Matrix& theta = part.terms[j].theta;
    Matrix grad = kernels::term_gradient(encoded[j], upstream, t_eval);
    if (smoothing.lambda_s != 0.0) grad += 2.0 * smoothing.lambda_s * (theta * part.terms[j].s_basis->penalty());
    if (smoothing.lambda_t != 0.0) grad += 2.0 * smoothing.lambda_t * (pt * theta);
    g.terms.push_back(std::move(grad));
  }
  return g;
}

StructuredPart make_structured_part(const FunctionalDataset& ds, BasisCache& cache, int num_s_basis,
                                    int num_t_basis, int degree) {
  StructuredPart part;
  part.t_basis = cache.get(ds.outcome_grid, num_t_basis, degree);
  part.intercept = Vector::Zero(num_t_basis);
  for (std::size_t j = 0; j < ds.num_predictors(); ++j) {
    StructuredTerm t;
    t.s_basis = cache.get(ds.predictor_grids[j], num_s_basis, degree);
    t.theta = Matrix::Zero(num_t_basis, num_s_basis);
    t.predictor_index = j;
    part.terms.push_back(std::move(t));
  }
  return part;
}

std::size_t drop_unobserved_directions(StructuredPart& part, const std::vector<RowMatrix>& encoded, double rtol) {
  if (encoded.size() != part.terms.size()) throw InvalidArgument("drop_unobserved_directions: one encoding per term");
  std::size_t dropped = 0;
  for (std::size_t j = 0; j < part.terms.size(); ++j) {
    const RowMatrix& e = encoded[j];
    const Matrix gram = e.transpose() * e;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& ev = es.eigenvalues();
    const double cut = rtol * std::max(ev.maxCoeff(), 0.0);
    Matrix keep(gram.rows(), 0);
    for (Index k = 0; k < ev.size(); ++k) {
      if (ev(k) > cut) {
        keep.conservativeResize(Eigen::NoChange, keep.cols() + 1);
        keep.col(keep.cols() - 1) = es.eigenvectors().col(k);
      }
    }
    dropped += static_cast<std::size_t>(gram.rows() - keep.cols());
    if (keep.cols() < gram.rows()) {
      Matrix& theta = part.terms[j].theta;
      theta = (theta * keep) * keep.transpose();
    }
  }
  return dropped;
}

}  // namespace ssfr
