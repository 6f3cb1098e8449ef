#include <omp.h>

#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace ssfr::kernels {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads < 1) throw InvalidArgument("thread count must be >= 1");
  omp_set_num_threads(threads);
}

namespace parallel {

RowMatrix encode_rows(const RowMatrix& x, std::span<const double> weights, const Matrix& phi) {
  if (x.cols() != phi.cols() || static_cast<Index>(weights.size()) != x.cols())
    throw InvalidArgument("encode_rows: shape mismatch");
  const Index n = x.rows(), k_dim = phi.rows(), r_dim = x.cols();
  // Quadrature weights folded into the basis once: (w o phi), row-major for contiguous dots.
  RowMatrix weighted(k_dim, r_dim);
  for (Index k = 0; k < k_dim; ++k)
    for (Index r = 0; r < r_dim; ++r) weighted(k, r) = weights[r] * phi(k, r);
  RowMatrix enc(n, k_dim);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const double* xi = x.data() + i * r_dim;
    for (Index k = 0; k < k_dim; ++k) {
      const double* wk = weighted.data() + k * r_dim;
      double acc = 0.0;
      for (Index r = 0; r < r_dim; ++r) acc += wk[r] * xi[r];
      enc(i, k) = acc;
    }
  }
  return enc;
}

void decode_add(const RowMatrix& enc, const Matrix& theta, const Matrix& psi, RowMatrix& out) {
  if (theta.cols() != enc.cols() || theta.rows() != psi.rows() || out.rows() != enc.rows() ||
      out.cols() != psi.cols())
    throw InvalidArgument("decode_add: shape mismatch");
  const Index n = enc.rows(), u_dim = theta.rows(), k_dim = theta.cols(), q_dim = psi.cols();
#pragma omp parallel
  {
    Vector latent(u_dim);
#pragma omp for schedule(static)
    for (Index i = 0; i < n; ++i) {
      for (Index u = 0; u < u_dim; ++u) {
        double acc = 0.0;
        for (Index k = 0; k < k_dim; ++k) acc += theta(u, k) * enc(i, k);
        latent(u) = acc;
      }
      double* row = out.data() + i * q_dim;
      for (Index q = 0; q < q_dim; ++q) {
        double acc = 0.0;
        for (Index u = 0; u < u_dim; ++u) acc += latent(u) * psi(u, q);
        row[q] += acc;
      }
    }
  }
}

Matrix term_gradient(const RowMatrix& enc, const RowMatrix& upstream, const Matrix& psi) {
  if (enc.rows() != upstream.rows() || upstream.cols() != psi.cols())
    throw InvalidArgument("term_gradient: shape mismatch");
  const Index n = enc.rows(), u_dim = psi.rows(), k_dim = enc.cols(), q_dim = psi.cols();
  // projected(i,u) = sum_q upstream(i,q) psi(u,q)
  Matrix projected(n, u_dim);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const double* up = upstream.data() + i * q_dim;
    for (Index u = 0; u < u_dim; ++u) {
      double acc = 0.0;
      for (Index q = 0; q < q_dim; ++q) acc += up[q] * psi(u, q);
      projected(i, u) = acc;
    }
  }
  Matrix grad(u_dim, k_dim);
#pragma omp parallel for schedule(static)
  for (Index u = 0; u < u_dim; ++u)
    for (Index k = 0; k < k_dim; ++k) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) acc += projected(i, u) * enc(i, k);
      grad(u, k) = acc;
    }
  return grad;
}

Vector weighted_row_sq_error(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi) {
  if (y.rows() != mu.rows() || y.cols() != mu.cols() || static_cast<Index>(xi.size()) != y.cols())
    throw InvalidArgument("weighted_row_sq_error: shape mismatch");
  const Index n = y.rows(), q_dim = y.cols();
  Vector out(n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index q = 0; q < q_dim; ++q) {
      const double d = y(i, q) - mu(i, q);
      acc += xi[q] * d * d;
    }
    out(i) = acc;
  }
  return out;
}

RowMatrix omega_rows(const std::vector<const RowMatrix*>& encs, const Matrix& psi, Index first,
                     Index count) {
  const Index u_dim = psi.rows();
  const Index q_dim = psi.cols();
  Index cols = u_dim;
  for (const auto* e : encs) cols += u_dim * e->cols();
  RowMatrix omega(count * q_dim, cols);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < count; ++i) {
    for (Index q = 0; q < q_dim; ++q) {
      double* row = omega.data() + ((i * q_dim) + q) * cols;
      for (Index u = 0; u < u_dim; ++u) row[u] = psi(u, q);
      Index offset = u_dim;
      for (const auto* e : encs) {
        const Index k_dim = e->cols();
        const double* ei = e->data() + (first + i) * k_dim;
        for (Index u = 0; u < u_dim; ++u) {
          const double p = psi(u, q);
          for (Index k = 0; k < k_dim; ++k) row[offset + u * k_dim + k] = p * ei[k];
        }
        offset += u_dim * k_dim;
      }
    }
  }
  return omega;
}

}  // namespace parallel
}  // namespace ssfr::kernels
