#include "ssfr/pho.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace ssfr {

namespace {

Index stacked_size(const StructuredPart& part) {
  Index p = part.intercept.size();
  for (const auto& t : part.terms) p += t.theta.size();
  return p;
}

std::vector<const RowMatrix*> pointers(const std::vector<RowMatrix>& encoded) {
  std::vector<const RowMatrix*> out;
  for (const auto& e : encoded) out.push_back(&e);
  return out;
}

void check_encoded(const StructuredPart& part, const std::vector<RowMatrix>& encoded, Index n) {
  if (encoded.size() != part.terms.size()) throw InvalidArgument("pho: one encoding per term required");
  for (std::size_t j = 0; j < encoded.size(); ++j)
    if (encoded[j].rows() != n || encoded[j].cols() != part.terms[j].theta.cols())
      throw InvalidArgument("pho: encoding shape mismatch for term " + std::to_string(j));
}

}  // namespace

Vector stack_coefficients(const StructuredPart& part) {
  Vector out(stacked_size(part));
  Index off = 0;
  out.segment(off, part.intercept.size()) = part.intercept;
  off += part.intercept.size();
  for (const auto& t : part.terms) {
    const Matrix tt = t.theta.transpose();  // K x U, column-major => index u*K + k
    out.segment(off, tt.size()) = Eigen::Map<const Vector>(tt.data(), tt.size());
    off += tt.size();
  }
  return out;
}

StructuredPart unstack_coefficients(const StructuredPart& part, const Vector& stacked) {
  if (stacked.size() != stacked_size(part)) throw ContractViolation("pho: coefficient layout does not match the part");
  StructuredPart out = part;
  Index off = 0;
  out.intercept = stacked.segment(off, part.intercept.size());
  off += part.intercept.size();
  for (auto& t : out.terms) {
    const Index u_dim = t.theta.rows(), k_dim = t.theta.cols();
    const Eigen::Map<const Matrix> tt(stacked.data() + off, k_dim, u_dim);
    t.theta = tt.transpose();
    off += u_dim * k_dim;
  }
  return out;
}

OmegaMatrix assemble_omega(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                           Index n, std::size_t memory_budget) {
  check_encoded(part, encoded, n);
  if (t_eval.rows() != part.intercept.size()) throw InvalidArgument("assemble_omega: t_eval rows differ from U");
  const Index p = stacked_size(part);
  const double bytes = static_cast<double>(n) * static_cast<double>(t_eval.cols()) * static_cast<double>(p) * sizeof(double);
  if (bytes > static_cast<double>(memory_budget))
    throw CapacityError("assemble_omega: dense basis matrix needs " + std::to_string(static_cast<long long>(bytes)) +
                        " bytes, over the budget of " + std::to_string(memory_budget) + "; use the Gram path");
  OmegaMatrix omega;
  omega.n = n;
  omega.q = t_eval.cols();
  omega.values = kernels::omega_rows(pointers(encoded), t_eval, 0, n);
  Index off = 0;
  omega.blocks.emplace_back(off, part.intercept.size());
  off += part.intercept.size();
  for (const auto& t : part.terms) {
    omega.blocks.emplace_back(off, t.theta.size());
    off += t.theta.size();
  }
  return omega;
}

RowMatrix omega_times(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                      const Vector& stacked, Index n) {
  return structured_forward(unstack_coefficients(part, stacked), encoded, t_eval, n);
}

Vector omega_transpose_times(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                             const RowMatrix& values) {
  check_encoded(part, encoded, values.rows());
  StructuredPart grads = part;
  grads.intercept = t_eval * values.colwise().sum().transpose();
  for (std::size_t j = 0; j < encoded.size(); ++j) grads.terms[j].theta = kernels::term_gradient(encoded[j], values, t_eval);
  return stack_coefficients(grads);
}

double pho_rtol(Index rows, Index cols) { return 1e-10 * static_cast<double>(std::max(rows, cols)); }

PhoResult pho_correct(const OmegaMatrix& omega, const Vector& theta, const RowMatrix& lambda_minus) {
  const Index big_n = omega.values.rows(), p = omega.values.cols();
  if (theta.size() != p) throw InvalidArgument("pho_correct: coefficient length differs from Omega columns");
  if (lambda_minus.rows() != omega.n || lambda_minus.cols() != omega.q)
    throw InvalidArgument("pho_correct: deep predictions shape differs from n x Q");
  if (!theta.allFinite() || !lambda_minus.allFinite() || !omega.values.allFinite())
    throw InvalidArgument("pho_correct: non-finite input");
  const Eigen::Map<const Vector> lam(lambda_minus.data(), big_n);
  const Matrix dense = omega.values;
  Eigen::BDCSVD<Matrix> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = sigma.size() > 0 ? pho_rtol(big_n, p) * sigma(0) : 0.0;
  Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
  const Matrix u = svd.matrixU().leftCols(rank);
  const Matrix v = svd.matrixV().leftCols(rank);
  const Vector coords = u.transpose() * lam;
  PhoResult result;
  result.rank = rank;
  result.theta_corrected = theta + v * coords.cwiseQuotient(sigma.head(rank));
  Vector perp = lam - u * coords;
  result.lambda_perp = Eigen::Map<const RowMatrix>(perp.data(), omega.n, omega.q);
  result.residual_norm = (omega.values.transpose() * perp).norm();
  return result;
}

PhoResult pho_correct_gram(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                           const RowMatrix& lambda_minus) {
  const Index n = lambda_minus.rows();
  check_encoded(part, encoded, n);
  if (lambda_minus.cols() != t_eval.cols()) throw InvalidArgument("pho_correct_gram: deep predictions shape mismatch");
  if (!lambda_minus.allFinite()) throw InvalidArgument("pho_correct_gram: non-finite input");
  const Index p = stacked_size(part);
  const auto ptrs = pointers(encoded);
  Matrix gram = Matrix::Zero(p, p);
  const Index chunk = std::max<Index>(1, 4096 / std::max<Index>(1, t_eval.cols()));
  for (Index first = 0; first < n; first += chunk) {
    const Index count = std::min(chunk, n - first);
    const RowMatrix block = kernels::omega_rows(ptrs, t_eval, first, count);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& ev = eig.eigenvalues();
  const double ev_max = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  const double rtol = pho_rtol(n * t_eval.cols(), p);
  const double cutoff = std::max(rtol * rtol, static_cast<double>(p) * std::numeric_limits<double>::epsilon()) * ev_max;
  Vector inv = Vector::Zero(ev.size());
  Index rank = 0;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) {
      inv(i) = 1.0 / ev(i);
      ++rank;
    }
  const Vector rhs = omega_transpose_times(part, encoded, t_eval, lambda_minus);
  const Vector delta = eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * rhs);
  PhoResult result;
  result.rank = rank;
  result.theta_corrected = stack_coefficients(part) + delta;
  result.corrected = unstack_coefficients(part, result.theta_corrected);
  result.lambda_perp = lambda_minus - omega_times(part, encoded, t_eval, delta, n);
  result.residual_norm = omega_transpose_times(part, encoded, t_eval, result.lambda_perp).norm();
  return result;
}

PhoResult post_hoc_orthogonalize(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                                 const RowMatrix& lambda_minus, PhoPath path, std::size_t memory_budget) {
  const Matrix& t_eval = part.t_basis->eval_matrix();
  const Index big_n = lambda_minus.rows() * lambda_minus.cols();
  if (path == PhoPath::gram || (path == PhoPath::automatic && big_n > 50000))
    return pho_correct_gram(part, encoded, t_eval, lambda_minus);
  const OmegaMatrix omega = assemble_omega(part, encoded, t_eval, lambda_minus.rows(), memory_budget);
  PhoResult result = pho_correct(omega, stack_coefficients(part), lambda_minus);
  result.corrected = unstack_coefficients(part, result.theta_corrected);
  return result;
}

std::vector<RowMatrix> corrected_surfaces(const PhoResult& result, const StructuredPart& part,
                                          const std::vector<std::vector<double>>& s_points,
                                          std::span<const double> t_points) {
  if (s_points.size() != part.terms.size()) throw ContractViolation("corrected_surfaces: one s mesh per term required");
  const StructuredPart corrected = unstack_coefficients(part, result.theta_corrected);
  std::vector<RowMatrix> out;
  for (std::size_t j = 0; j < corrected.terms.size(); ++j)
    out.push_back(surface(corrected.terms[j].theta, *corrected.terms[j].s_basis, *corrected.t_basis, s_points[j], t_points));
  return out;
}

}  // namespace ssfr
