#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ssfr/structured.hpp"
#include "ssfr/types.hpp"

namespace ssfr {

/// Stacked basis matrix for N = n*Q data points, P = U + sum_j U*K_j columns.
/// Row i*Q + q holds psi(t_q)^T for the intercept block, then
/// psi(t_q)^T (x) encoded_j(i) for each term. Within a term block, column
/// u*K_j + k multiplies Theta_j(u, k); the stacked coefficient vector is
/// therefore vec(Theta_j^T) in column-major order.
struct OmegaMatrix {
  RowMatrix values;
  std::vector<std::pair<Index, Index>> blocks;  // (offset, width); block 0 is the intercept
  Index n = 0;
  Index q = 0;
};

/// Default cap on the dense Omega (bytes).
inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{1} << 30;

/// Throws CapacityError when N*P doubles exceed `memory_budget`.
OmegaMatrix assemble_omega(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                           Index n, std::size_t memory_budget = kDefaultMemoryBudget);

/// [intercept; vec(Theta_1^T); ...; vec(Theta_J^T)].
Vector stack_coefficients(const StructuredPart& part);
/// Copy of `part` carrying the coefficients of a stacked vector.
StructuredPart unstack_coefficients(const StructuredPart& part, const Vector& stacked);

/// Omega * stacked without forming Omega (n x Q result).
RowMatrix omega_times(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                      const Vector& stacked, Index n);
/// Omega^T * vec_rows(values) without forming Omega.
Vector omega_transpose_times(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                             const RowMatrix& values);

struct PhoResult {
  Vector theta_corrected;
  StructuredPart corrected;  // empty part (no basis) when only the matrix route was used
  RowMatrix lambda_perp;     // n x Q
  Index rank = 0;
  double residual_norm = 0.0;  // ||Omega^T lambda_perp||
};

/// Relative singular value cutoff 1e-10 * max(N, P).
double pho_rtol(Index rows, Index cols);

/// theta~ = theta + Omega^+ lambda_minus, lambda_perp = lambda_minus - Omega Omega^+ lambda_minus
/// via a thin SVD of Omega.
PhoResult pho_correct(const OmegaMatrix& omega, const Vector& theta, const RowMatrix& lambda_minus);

/// Same correction via (Omega^T Omega)^+ Omega^T lambda_minus; Omega^T Omega is
/// accumulated in observation blocks so the N x P matrix is never held.
PhoResult pho_correct_gram(const StructuredPart& part, const std::vector<RowMatrix>& encoded, const Matrix& t_eval,
                           const RowMatrix& lambda_minus);

enum class PhoPath { automatic, svd, gram };

/// Picks the Gram route when N > 50,000 (or when asked), else the SVD route.
PhoResult post_hoc_orthogonalize(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                                 const RowMatrix& lambda_minus, PhoPath path = PhoPath::automatic,
                                 std::size_t memory_budget = kDefaultMemoryBudget);

/// Surfaces of every corrected term on the mesh (s_points[j] x t_points).
std::vector<RowMatrix> corrected_surfaces(const PhoResult& result, const StructuredPart& part,
                                          const std::vector<std::vector<double>>& s_points,
                                          std::span<const double> t_points);

}  // namespace ssfr
