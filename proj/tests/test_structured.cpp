#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "ssfr/error.hpp"
#include "ssfr/rng.hpp"
#include "ssfr/simgen.hpp"
#include "ssfr/structured.hpp"

using namespace ssfr;

namespace {

template <typename M>
M random_matrix(Index rows, Index cols, Rng& rng) {
  M m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

struct Fixture {
  FunctionalDataset ds;
  BasisCache cache;
  StructuredPart part;
  std::vector<RowMatrix> enc;

  Fixture(int j_count, std::uint64_t seed, int k = 5, int u = 4) : ds(make(j_count, seed)) {
    part = make_structured_part(ds, cache, k, u, 3);
    Rng rng(seed + 100);
    part.intercept = random_matrix<Matrix>(u, 1, rng);
    for (auto& t : part.terms) t.theta = random_matrix<Matrix>(u, k, rng);
    enc = encode_terms(part, ds);
  }

  static FunctionalDataset make(int j_count, std::uint64_t seed) {
    SimConfig sc;
    sc.n = 12;
    sc.R = 21;
    sc.Q = 13;
    sc.J = j_count;
    sc.seed = seed;
    if (j_count == 0) {
      sc.J = 1;
      FunctionalDataset ds = generate(sc).data;
      ds.predictors.clear();
      ds.predictor_grids.clear();
      ds.names.clear();
      return ds;
    }
    return generate(sc).data;
  }

  const Matrix& psi() const { return part.t_basis->eval_matrix(); }
};

}  // namespace

TEST(Encode, ConstantOneSumsToLength) {
  const Grid g = make_uniform_grid(0.0, 1.0, 41);
  const BasisSystem b = bspline_basis(g, 7, 3);
  const std::vector<double> ones(41, 1.0);
  EXPECT_NEAR(encode(ones, g, b).sum(), 1.0, 1e-12);
  const std::vector<double> zeros(41, 0.0);
  EXPECT_EQ(encode(zeros, g, b), Vector::Zero(7));
  EXPECT_THROW(encode(std::vector<double>(40, 1.0), g, b), InvalidArgument);
}

TEST(Encode, DegreeZeroHandExample) {
  // Grid 0, .25, .5, .75, 1 with weights .125, .25, .25, .25, .125.
  const Grid g = make_uniform_grid(0.0, 1.0, 5);
  const std::vector<double> ones(5, 1.0);
  const Vector two = encode(ones, g, bspline_basis(g, 2, 0));
  EXPECT_NEAR(two(0), 0.375, 1e-15);  // points 0, .25
  EXPECT_NEAR(two(1), 0.625, 1e-15);  // points .5, .75, 1
  const Vector four = encode(ones, g, bspline_basis(g, 4, 0));
  EXPECT_NEAR(four(0), 0.125, 1e-15);
  EXPECT_NEAR(four(1), 0.25, 1e-15);
  EXPECT_NEAR(four(2), 0.25, 1e-15);
  EXPECT_NEAR(four(3), 0.375, 1e-15);
}

TEST(Encode, RowsMatchSingle) {
  const Fixture f(1, 2);
  for (Index i = 0; i < f.ds.n(); ++i) {
    const RowVector row = f.ds.predictors[0].row(i);
    const Vector e = encode(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                            f.ds.predictor_grids[0], *f.part.terms[0].s_basis);
    EXPECT_LE((e.transpose() - f.enc[0].row(i)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(TermForward, MatchesDoubleLoop) {
  Rng rng(4);
  const Vector enc = random_matrix<Matrix>(6, 1, rng);
  const Matrix theta = random_matrix<Matrix>(3, 6, rng);
  const Matrix psi = random_matrix<Matrix>(3, 9, rng);
  const RowVector out = term_forward(enc, theta, psi);
  for (Index q = 0; q < 9; ++q) {
    double v = 0.0;
    for (Index u = 0; u < 3; ++u)
      for (Index k = 0; k < 6; ++k) v += enc(k) * theta(u, k) * psi(u, q);
    EXPECT_NEAR(out(q), v, 1e-12);
  }
  EXPECT_EQ(term_forward(enc, Matrix::Zero(3, 6), psi), RowVector::Zero(9));
  EXPECT_THROW(term_forward(enc, Matrix::Zero(3, 5), psi), InvalidArgument);
}

TEST(TermForward, KroneckerIdentity) {
  Rng rng(5);
  const Vector enc = random_matrix<Matrix>(4, 1, rng);
  const Matrix theta = random_matrix<Matrix>(3, 4, rng);
  const Matrix psi = random_matrix<Matrix>(3, 7, rng);
  // Row q of the design: psi(:,q)^T (x) enc^T, against vec(theta^T).
  const Matrix tt = theta.transpose();
  const Eigen::Map<const Vector> stacked(tt.data(), tt.size());
  const RowVector out = term_forward(enc, theta, psi);
  for (Index q = 0; q < 7; ++q) {
    Vector row(12);
    for (Index u = 0; u < 3; ++u) row.segment(u * 4, 4) = psi(u, q) * enc;
    EXPECT_NEAR(row.dot(stacked), out(q), 1e-12);
  }
}

TEST(TermForward, ConstantBasesGiveConstantCurve) {
  const Grid s = make_uniform_grid(0.0, 1.0, 11);
  const Grid t = make_uniform_grid(0.0, 1.0, 6);
  const BasisSystem sb = bspline_basis(s, 1, 0), tb = bspline_basis(t, 1, 0);
  const std::vector<double> ones(11, 1.0);
  const Matrix theta = Matrix::Constant(1, 1, 2.75);
  const RowVector out = term_forward(encode(ones, s, sb), theta, tb.eval_matrix());
  EXPECT_LE((out.array() - 2.75).abs().maxCoeff(), 1e-14);
  const RowMatrix w = surface(theta, sb, tb, s.points(), t.points());
  EXPECT_LE((w.array() - 2.75).abs().maxCoeff(), 1e-14);
}

TEST(TermForward, Linear) {
  Rng rng(6);
  const Vector a = random_matrix<Matrix>(4, 1, rng), b = random_matrix<Matrix>(4, 1, rng);
  const Matrix theta = random_matrix<Matrix>(3, 4, rng);
  const Matrix psi = random_matrix<Matrix>(3, 5, rng);
  const RowVector lhs = term_forward(2.0 * a - 3.0 * b, theta, psi);
  const RowVector rhs = 2.0 * term_forward(a, theta, psi) - 3.0 * term_forward(b, theta, psi);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StructuredForward, ZeroAndInterceptOnly) {
  Fixture f(2, 7);
  StructuredPart zero = f.part;
  zero.intercept.setZero();
  for (auto& t : zero.terms) t.theta.setZero();
  EXPECT_EQ(structured_forward(zero, f.enc), RowMatrix::Zero(f.ds.n(), 13));

  Fixture g(0, 8);
  const RowMatrix out = structured_forward(g.part, g.enc, 5);
  const RowVector curve = g.part.intercept.transpose() * g.psi();
  ASSERT_EQ(out.rows(), 5);
  for (Index i = 0; i < 5; ++i) EXPECT_LE((out.row(i) - curve).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(structured_forward(g.part, g.enc), InvalidArgument);
}

TEST(StructuredForward, AdditiveOverTerms) {
  const Fixture f(2, 9);
  StructuredPart first = f.part, second = f.part;
  first.terms[1].theta.setZero();
  second.terms[0].theta.setZero();
  second.intercept.setZero();
  const RowMatrix sum = structured_forward(first, f.enc) + structured_forward(second, f.enc);
  EXPECT_LE((structured_forward(f.part, f.enc) - sum).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StructuredForward, RowsMatchTermForward) {
  const Fixture f(2, 10);
  const RowMatrix out = structured_forward(f.part, f.enc);
  for (Index i = 0; i < f.ds.n(); ++i) {
    RowVector expect = f.part.intercept.transpose() * f.psi();
    for (std::size_t j = 0; j < 2; ++j)
      expect += term_forward(f.enc[j].row(i).transpose(), f.part.terms[j].theta, f.psi());
    EXPECT_LE((out.row(i) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Surface, QuadratureReproducesForward) {
  const Fixture f(1, 11);
  const auto& term = f.part.terms[0];
  const Grid& sg = f.ds.predictor_grids[0];
  const RowMatrix w = surface(term.theta, *term.s_basis, *f.part.t_basis, sg.points(), f.ds.outcome_grid.points());
  for (Index i = 0; i < f.ds.n(); ++i) {
    RowVector via_surface = RowVector::Zero(13);
    for (Index r = 0; r < 21; ++r) via_surface += sg.quad_weights()[r] * f.ds.predictors[0](i, r) * w.row(r);
    const RowVector direct = term_forward(f.enc[0].row(i).transpose(), term.theta, f.psi());
    EXPECT_LE((via_surface - direct).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_EQ(surface(Matrix::Zero(4, 5), *term.s_basis, *f.part.t_basis, sg.points(), f.ds.outcome_grid.points()),
            RowMatrix::Zero(21, 13));
  const std::vector<double> outside{1.5};
  EXPECT_THROW(surface(term.theta, *term.s_basis, *f.part.t_basis, outside, f.ds.outcome_grid.points()),
               InvalidArgument);
}

namespace {

// Objective sum(upstream o forward) + penalty, for finite differences.
double linear_objective(const StructuredPart& part, const std::vector<RowMatrix>& enc, const Matrix& psi,
                        const RowMatrix& up, const SmoothingParams& sm) {
  return (structured_forward(part, enc, psi).array() * up.array()).sum() + structured_penalty(part, sm);
}

}  // namespace

TEST(Gradients, MatchFiniteDifferences) {
  Fixture f(2, 12);
  Rng rng(13);
  const RowMatrix up = random_matrix<RowMatrix>(f.ds.n(), 13, rng);
  const SmoothingParams sm{0.4, 1.3};
  const StructuredGradients g = structured_gradients(f.part, f.enc, f.psi(), up, sm);
  const double h = 1e-5;
  auto check = [&](double analytic, double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double plus = linear_objective(f.part, f.enc, f.psi(), up, sm);
    slot = saved - h;
    const double minus = linear_objective(f.part, f.enc, f.psi(), up, sm);
    slot = saved;
    const double numeric = (plus - minus) / (2 * h);
    EXPECT_LE(std::abs(numeric - analytic) / std::max({std::abs(analytic), std::abs(numeric), 1e-4}), 1e-6);
  };
  for (Index u = 0; u < f.part.intercept.size(); ++u) check(g.intercept(u), f.part.intercept(u));
  for (std::size_t j = 0; j < f.part.terms.size(); ++j)
    for (Index i = 0; i < f.part.terms[j].theta.size(); ++i)
      check(g.terms[j].data()[i], f.part.terms[j].theta.data()[i]);
}

TEST(Gradients, ZeroUpstreamAndConstantTheta) {
  Fixture f(1, 14);
  const RowMatrix up = RowMatrix::Zero(f.ds.n(), 13);
  const StructuredGradients g0 = structured_gradients(f.part, f.enc, f.psi(), up, {0.0, 0.0});
  EXPECT_EQ(g0.intercept, Vector::Zero(4));
  EXPECT_EQ(g0.terms[0], Matrix::Zero(4, 5));

  f.part.intercept.setConstant(3.0);
  f.part.terms[0].theta.setConstant(-1.5);
  const StructuredGradients gp = structured_gradients(f.part, f.enc, f.psi(), up, {2.0, 5.0});
  EXPECT_LE(gp.intercept.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(gp.terms[0].cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BasisCache, SharesIdenticalGrids) {
  const Fixture f(3, 15);
  EXPECT_EQ(f.part.terms[0].s_basis.get(), f.part.terms[1].s_basis.get());
  EXPECT_EQ(f.part.terms[1].s_basis.get(), f.part.terms[2].s_basis.get());
  BasisCache cache;
  const Grid g = make_uniform_grid(0.0, 1.0, 9);
  const auto a = cache.get(g, 5, 3);
  const auto b = cache.get(make_uniform_grid(0.0, 1.0, 9), 5, 3);
  const auto c = cache.get(g, 6, 3);
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), c.get());
  EXPECT_EQ(cache.size(), 2u);
}

TEST(DropUnobserved, KeepsTrainingPredictions) {
  Fixture f(2, 16);
  const RowMatrix before = structured_forward(f.part, f.enc);
  const std::size_t dropped = drop_unobserved_directions(f.part, f.enc);
  // The simulated predictors integrate to zero, so the s-constant direction is invisible.
  EXPECT_GE(dropped, 2u);
  EXPECT_LE((structured_forward(f.part, f.enc) - before).cwiseAbs().maxCoeff(), 1e-10);
}
