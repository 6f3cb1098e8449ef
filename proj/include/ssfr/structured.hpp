#pragma once

#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "ssfr/dataset.hpp"
#include "ssfr/grid.hpp"
#include "ssfr/types.hpp"

namespace ssfr {

/// One functional term: weight surface w(s,t) = psi(t)^T Theta phi(s) with
/// Theta of shape U x K.
struct StructuredTerm {
  Matrix theta;
  std::shared_ptr<const BasisSystem> s_basis;
  std::size_t predictor_index = 0;
};

/// Intercept curve plus one term per predictor; every term decodes through
/// the same outcome basis.
struct StructuredPart {
  Vector intercept;
  std::vector<StructuredTerm> terms;
  std::shared_ptr<const BasisSystem> t_basis;

  int num_outcome_basis() const { return t_basis->num_basis(); }
  void validate() const;
};

struct SmoothingParams {
  double lambda_s = 1.0;
  double lambda_t = 1.0;
};

/// Hands out one BasisSystem per distinct (grid, size, degree), so predictors
/// observed on a common grid share a single evaluated basis.
class BasisCache {
 public:
  std::shared_ptr<const BasisSystem> get(const Grid& grid, int num_basis, int degree);
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<double> points;
    int num_basis;
    int degree;
    std::shared_ptr<const BasisSystem> basis;
  };
  std::vector<Entry> entries_;
};

/// Quadrature approximation of the basis functionals: out_k = sum_r w_r phi_k(s_r) x(s_r).
Vector encode(std::span<const double> x_row, const Grid& grid, const BasisSystem& s_basis);
RowMatrix encode_rows(const RowMatrix& x, const Grid& grid, const BasisSystem& s_basis);

/// Encodes every term's predictor; result[j] is n x K_j.
std::vector<RowMatrix> encode_terms(const StructuredPart& part, const FunctionalDataset& ds);

/// (encoded . Theta^T) . t_eval, never forming a Kronecker design row.
RowVector term_forward(const Vector& encoded, const Matrix& theta, const Matrix& t_eval);

/// n x Q: decoded intercept broadcast over rows plus every term. n is taken
/// from the encodings unless given (it must be given when there are no terms).
RowMatrix structured_forward(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                             const Matrix& t_eval, Index n = -1);
RowMatrix structured_forward(const StructuredPart& part, const std::vector<RowMatrix>& encoded, Index n = -1);

/// Weight surface on a mesh; rows follow s_points, columns follow t_points.
RowMatrix surface(const Matrix& theta, const BasisSystem& s_basis, const BasisSystem& t_basis,
                  std::span<const double> s_points, std::span<const double> t_points);

/// Smoothness penalty of the whole part; the intercept only has a t-direction.
double structured_penalty(const StructuredPart& part, const SmoothingParams& smoothing);

struct StructuredGradients {
  Vector intercept;
  std::vector<Matrix> terms;
};

/// Exact gradient of sum_{i,q} upstream(i,q) * lambda_plus(i,q) plus the
/// gradient of structured_penalty.
StructuredGradients structured_gradients(const StructuredPart& part, const std::vector<RowMatrix>& encoded,
                                         const Matrix& t_eval, const RowMatrix& upstream,
                                         const SmoothingParams& smoothing);

/// Zero-initialized part with one term per predictor, bases drawn from the cache.
StructuredPart make_structured_part(const FunctionalDataset& ds, BasisCache& cache, int num_s_basis,
                                    int num_t_basis, int degree);

/// Removes from each Theta_j the s-directions that no training encoding
/// excites (eigenvalues of E_j^T E_j at or below rtol times the largest).
/// Such directions leave every training prediction unchanged but are not
/// pulled back by the data; curves that integrate to zero, for instance,
/// never see the s-constant direction. Returns the number of dropped
/// directions summed over terms.
std::size_t drop_unobserved_directions(StructuredPart& part, const std::vector<RowMatrix>& encoded,
                                       double rtol = 1e-10);

}  // namespace ssfr
