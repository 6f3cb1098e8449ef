#include <gtest/gtest.h>

#include <vector>

#include "ssfr/kernels.hpp"
#include "ssfr/rng.hpp"

using namespace ssfr;

namespace {

template <typename M>
M random_matrix(Index rows, Index cols, Rng& rng) {
  M m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<double> random_weights(Index r, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(r));
  for (auto& v : w) v = rng.uniform(0.1, 1.0);
  return w;
}

class KernelTest : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { kernels::set_thread_count(GetParam()); }
  void TearDown() override { kernels::set_thread_count(1); }
};

}  // namespace

TEST_P(KernelTest, EncodeRows) {
  Rng rng(1);
  const auto x = random_matrix<RowMatrix>(37, 23, rng);
  const auto phi = random_matrix<Matrix>(6, 23, rng);
  const auto w = random_weights(23, rng);
  RowMatrix naive = RowMatrix::Zero(37, 6);
  for (Index i = 0; i < 37; ++i)
    for (Index k = 0; k < 6; ++k)
      for (Index r = 0; r < 23; ++r) naive(i, k) += w[static_cast<std::size_t>(r)] * phi(k, r) * x(i, r);
  const RowMatrix s = kernels::serial::encode_rows(x, w, phi);
  const RowMatrix p = kernels::parallel::encode_rows(x, w, phi);
  EXPECT_LE((s - naive).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((s - p).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
}

TEST_P(KernelTest, DecodeAdd) {
  Rng rng(2);
  const auto enc = random_matrix<RowMatrix>(29, 5, rng);
  const auto theta = random_matrix<Matrix>(4, 5, rng);
  const auto psi = random_matrix<Matrix>(4, 17, rng);
  const RowMatrix start = random_matrix<RowMatrix>(29, 17, rng);
  RowMatrix naive = start;
  for (Index i = 0; i < 29; ++i)
    for (Index q = 0; q < 17; ++q)
      for (Index u = 0; u < 4; ++u)
        for (Index k = 0; k < 5; ++k) naive(i, q) += enc(i, k) * theta(u, k) * psi(u, q);
  RowMatrix s = start, p = start;
  kernels::serial::decode_add(enc, theta, psi, s);
  kernels::parallel::decode_add(enc, theta, psi, p);
  EXPECT_LE((s - naive).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((s - p).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
}

TEST_P(KernelTest, TermGradient) {
  Rng rng(3);
  const auto enc = random_matrix<RowMatrix>(31, 5, rng);
  const auto up = random_matrix<RowMatrix>(31, 13, rng);
  const auto psi = random_matrix<Matrix>(4, 13, rng);
  Matrix naive = Matrix::Zero(4, 5);
  for (Index u = 0; u < 4; ++u)
    for (Index k = 0; k < 5; ++k)
      for (Index i = 0; i < 31; ++i)
        for (Index q = 0; q < 13; ++q) naive(u, k) += enc(i, k) * up(i, q) * psi(u, q);
  const Matrix s = kernels::serial::term_gradient(enc, up, psi);
  const Matrix p = kernels::parallel::term_gradient(enc, up, psi);
  EXPECT_LE((s - naive).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LE((s - p).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
}

TEST_P(KernelTest, WeightedRowSquaredError) {
  Rng rng(4);
  const auto y = random_matrix<RowMatrix>(19, 11, rng);
  const auto mu = random_matrix<RowMatrix>(19, 11, rng);
  const auto xi = random_weights(11, rng);
  const Vector s = kernels::serial::weighted_row_sq_error(y, mu, xi);
  const Vector p = kernels::parallel::weighted_row_sq_error(y, mu, xi);
  for (Index i = 0; i < 19; ++i) {
    double v = 0.0;
    for (Index q = 0; q < 11; ++q) v += xi[static_cast<std::size_t>(q)] * (y(i, q) - mu(i, q)) * (y(i, q) - mu(i, q));
    EXPECT_NEAR(s(i), v, 1e-12);
  }
  EXPECT_LE((s - p).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
}

TEST_P(KernelTest, OmegaRows) {
  Rng rng(5);
  const auto e1 = random_matrix<RowMatrix>(9, 3, rng);
  const auto e2 = random_matrix<RowMatrix>(9, 4, rng);
  const auto psi = random_matrix<Matrix>(2, 6, rng);
  const std::vector<const RowMatrix*> encs{&e1, &e2};
  const RowMatrix s = kernels::serial::omega_rows(encs, psi, 2, 5);
  const RowMatrix p = kernels::parallel::omega_rows(encs, psi, 2, 5);
  ASSERT_EQ(s.rows(), 5 * 6);
  ASSERT_EQ(s.cols(), 2 + 2 * 3 + 2 * 4);
  for (Index i = 0; i < 5; ++i)
    for (Index q = 0; q < 6; ++q) {
      const Index row = i * 6 + q;
      for (Index u = 0; u < 2; ++u) {
        EXPECT_EQ(s(row, u), psi(u, q));
        for (Index k = 0; k < 3; ++k) EXPECT_NEAR(s(row, 2 + u * 3 + k), psi(u, q) * e1(i + 2, k), 1e-15);
        for (Index k = 0; k < 4; ++k) EXPECT_NEAR(s(row, 8 + u * 4 + k), psi(u, q) * e2(i + 2, k), 1e-15);
      }
    }
  EXPECT_LE((s - p).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
}

TEST_P(KernelTest, ThreadCountApplied) { EXPECT_EQ(kernels::thread_count(), GetParam()); }

INSTANTIATE_TEST_SUITE_P(Threads, KernelTest, ::testing::Values(1, 2, 4));
