#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace ssfr::kernels::serial {

RowMatrix encode_rows(const RowMatrix& x, std::span<const double> weights, const Matrix& phi) {
  if (x.cols() != phi.cols() || static_cast<Index>(weights.size()) != x.cols())
    throw InvalidArgument("encode_rows: shape mismatch");
  RowMatrix enc = RowMatrix::Zero(x.rows(), phi.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < phi.rows(); ++k) {
      double acc = 0.0;
      for (Index r = 0; r < x.cols(); ++r) acc += weights[r] * phi(k, r) * x(i, r);
      enc(i, k) = acc;
    }
  return enc;
}

void decode_add(const RowMatrix& enc, const Matrix& theta, const Matrix& psi, RowMatrix& out) {
  if (theta.cols() != enc.cols() || theta.rows() != psi.rows() || out.rows() != enc.rows() ||
      out.cols() != psi.cols())
    throw InvalidArgument("decode_add: shape mismatch");
  for (Index i = 0; i < enc.rows(); ++i)
    for (Index q = 0; q < psi.cols(); ++q) {
      double acc = 0.0;
      for (Index u = 0; u < theta.rows(); ++u)
        for (Index k = 0; k < theta.cols(); ++k) acc += enc(i, k) * theta(u, k) * psi(u, q);
      out(i, q) += acc;
    }
}

Matrix term_gradient(const RowMatrix& enc, const RowMatrix& upstream, const Matrix& psi) {
  if (enc.rows() != upstream.rows() || upstream.cols() != psi.cols())
    throw InvalidArgument("term_gradient: shape mismatch");
  Matrix grad = Matrix::Zero(psi.rows(), enc.cols());
  for (Index u = 0; u < psi.rows(); ++u)
    for (Index k = 0; k < enc.cols(); ++k) {
      double acc = 0.0;
      for (Index i = 0; i < enc.rows(); ++i)
        for (Index q = 0; q < psi.cols(); ++q) acc += enc(i, k) * upstream(i, q) * psi(u, q);
      grad(u, k) = acc;
    }
  return grad;
}

Vector weighted_row_sq_error(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi) {
  if (y.rows() != mu.rows() || y.cols() != mu.cols() || static_cast<Index>(xi.size()) != y.cols())
    throw InvalidArgument("weighted_row_sq_error: shape mismatch");
  Vector out(y.rows());
  for (Index i = 0; i < y.rows(); ++i) {
    double acc = 0.0;
    for (Index q = 0; q < y.cols(); ++q) {
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
  RowMatrix omega = RowMatrix::Zero(count * q_dim, cols);
  for (Index i = first; i < first + count; ++i)
    for (Index q = 0; q < q_dim; ++q) {
      const Index row = (i - first) * q_dim + q;
      for (Index u = 0; u < u_dim; ++u) omega(row, u) = psi(u, q);
      Index offset = u_dim;
      for (const auto* e : encs) {
        const Index k_dim = e->cols();
        for (Index u = 0; u < u_dim; ++u)
          for (Index k = 0; k < k_dim; ++k) omega(row, offset + u * k_dim + k) = psi(u, q) * (*e)(i, k);
        offset += u_dim * k_dim;
      }
    }
  return omega;
}

}  // namespace ssfr::kernels::serial
