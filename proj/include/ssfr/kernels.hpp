#pragma once

// Hot loops of the structured part. Each kernel exists twice: a plain serial
// reference written as the textbook sum, and an OpenMP version used by the
// engine. Parallel versions split work over independent output entries and
// keep a fixed summation order per entry, so results do not depend on the
// thread count.

#include <span>
#include <vector>

#include "ssfr/types.hpp"

namespace ssfr::kernels {

namespace serial {

/// enc(i,k) = sum_r w_r phi(k,r) x(i,r); x is n x R, phi is K x R.
RowMatrix encode_rows(const RowMatrix& x, std::span<const double> weights, const Matrix& phi);

/// out(i,q) += sum_u sum_k enc(i,k) theta(u,k) psi(u,q).
void decode_add(const RowMatrix& enc, const Matrix& theta, const Matrix& psi, RowMatrix& out);

/// grad(u,k) = sum_i sum_q enc(i,k) upstream(i,q) psi(u,q).
Matrix term_gradient(const RowMatrix& enc, const RowMatrix& upstream, const Matrix& psi);

/// out(i) = sum_q xi_q (y(i,q) - mu(i,q))^2.
Vector weighted_row_sq_error(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi);

/// Rows [first, first + count) of the stacked basis matrix, observation-major,
/// t inside observation. Columns: U intercept columns, then per term U*K
/// columns with index u*K + k.
RowMatrix omega_rows(const std::vector<const RowMatrix*>& encs, const Matrix& psi,
                     Index first, Index count);

}  // namespace serial

namespace parallel {

RowMatrix encode_rows(const RowMatrix& x, std::span<const double> weights, const Matrix& phi);
void decode_add(const RowMatrix& enc, const Matrix& theta, const Matrix& psi, RowMatrix& out);
Matrix term_gradient(const RowMatrix& enc, const RowMatrix& upstream, const Matrix& psi);
Vector weighted_row_sq_error(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi);
RowMatrix omega_rows(const std::vector<const RowMatrix*>& encs, const Matrix& psi,
                     Index first, Index count);

}  // namespace parallel

// The engine calls these.
using parallel::decode_add;
using parallel::encode_rows;
using parallel::omega_rows;
using parallel::term_gradient;
using parallel::weighted_row_sq_error;

/// Number of OpenMP threads kernels will use.
int thread_count();
void set_thread_count(int threads);

}  // namespace ssfr::kernels
