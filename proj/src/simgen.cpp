#include "ssfr/simgen.hpp"

#include <cmath>
#include <numbers>

#include "ssfr/error.hpp"
#include "ssfr/structured.hpp"

namespace ssfr {

namespace {

struct Bump {
  double amplitude, s, t, sigma;
};

// Predictor curves integrate to zero, so the s-mean of a surface never
// reaches the outcome. The bumps share t_c and sigma and their amplitudes sum
// to zero, which leaves (up to truncation at the domain edges) no s-mean.
constexpr Bump kBumps[] = {{1.0, 0.5, 0.6, 0.10}, {-0.5, 0.25, 0.6, 0.10}, {-0.5, 0.75, 0.6, 0.10}};

double bumps(double s, double t) {
  double v = 0.0;
  for (const auto& b : kBumps) {
    const double d2 = (s - b.s) * (s - b.s) + (t - b.t) * (t - b.t);
    v += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
  }
  return v;
}

}  // namespace

SurfaceSpec::Kind parse_surface_kind(const std::string& name) {
  if (name == "bumps") return SurfaceSpec::Kind::bumps;
  if (name == "planted_theta") return SurfaceSpec::Kind::planted_theta;
  if (name == "custom_mesh") return SurfaceSpec::Kind::custom_mesh;
  throw InvalidArgument("unknown surface spec '" + name + "'");
}

std::string to_string(SurfaceSpec::Kind kind) {
  switch (kind) {
    case SurfaceSpec::Kind::bumps: return "bumps";
    case SurfaceSpec::Kind::planted_theta: return "planted_theta";
    case SurfaceSpec::Kind::custom_mesh: return "custom_mesh";
  }
  return "bumps";
}

void SimConfig::validate() const {
  if (n < 1 || R < 2 || Q < 2 || J < 1) throw InvalidArgument("sim config: need n >= 1, R >= 2, Q >= 2, J >= 1");
  if (!(snr > 0.0) || !std::isfinite(snr)) throw InvalidArgument("sim config: snr must be > 0");
  if (!(nonlinear_amplitude >= 0.0)) throw InvalidArgument("sim config: nonlinear_amplitude must be >= 0");
  if (!(s_lo < s_hi) || !(t_lo < t_hi)) throw InvalidArgument("sim config: empty domain");
  if (surface.kind == SurfaceSpec::Kind::planted_theta && !surface.theta.empty() &&
      surface.theta.size() != static_cast<std::size_t>(J))
    throw InvalidArgument("sim config: need one planted theta per predictor");
  if (surface.kind == SurfaceSpec::Kind::custom_mesh && surface.mesh.size() != static_cast<std::size_t>(J))
    throw InvalidArgument("sim config: need one custom mesh per predictor");
}

Matrix default_planted_theta(int num_t_basis, int num_s_basis, std::size_t predictor, int degree) {
  Matrix theta(num_t_basis, num_s_basis);
  const double scale = 1.0 / static_cast<double>(predictor + 1);
  for (int u = 0; u < num_t_basis; ++u)
    for (int k = 0; k < num_s_basis; ++k) {
      const double a = num_s_basis > 1 ? static_cast<double>(k) / (num_s_basis - 1) : 0.0;
      const double b = num_t_basis > 1 ? static_cast<double>(u) / (num_t_basis - 1) : 0.0;
      theta(u, k) = scale * (std::cos(std::numbers::pi * a) * std::sin(std::numbers::pi * b) + 0.5 * a * b);
    }
  // Remove each row's component along the basis integrals so the surface has
  // zero s-mean for every t (the part predictors can observe).
  const auto knots = clamped_uniform_knots(0.0, 1.0, num_s_basis, degree);
  Vector c(num_s_basis);
  for (int k = 0; k < num_s_basis; ++k)
    c(k) = (knots[static_cast<std::size_t>(k + degree + 1)] - knots[static_cast<std::size_t>(k)]) / (degree + 1);
  for (int u = 0; u < num_t_basis; ++u) theta.row(u) -= (theta.row(u).dot(c) / c.sum()) * RowVector::Ones(num_s_basis);
  return theta;
}

RowMatrix make_true_surface(const SurfaceSpec& spec, std::size_t predictor, const Grid& s_grid, const Grid& t_grid) {
  const auto sp = s_grid.points();
  const auto tp = t_grid.points();
  RowMatrix w(static_cast<Index>(sp.size()), static_cast<Index>(tp.size()));
  switch (spec.kind) {
    case SurfaceSpec::Kind::bumps: {
      const double scale = 1.0 / static_cast<double>(predictor + 1);
      for (std::size_t r = 0; r < sp.size(); ++r)
        for (std::size_t q = 0; q < tp.size(); ++q) {
          double s = (sp[r] - s_grid.lo()) / s_grid.length();
          if (predictor % 2 == 1) s = 1.0 - s;
          const double t = (tp[q] - t_grid.lo()) / t_grid.length();
          w(static_cast<Index>(r), static_cast<Index>(q)) = scale * bumps(s, t);
        }
      return w;
    }
    case SurfaceSpec::Kind::planted_theta: {
      const BasisSystem s_basis = bspline_basis(s_grid, spec.num_s_basis, spec.degree);
      const BasisSystem t_basis = bspline_basis(t_grid, spec.num_t_basis, spec.degree);
      const Matrix theta = predictor < spec.theta.size()
                               ? spec.theta[predictor]
                               : default_planted_theta(spec.num_t_basis, spec.num_s_basis, predictor, spec.degree);
      return surface(theta, s_basis, t_basis, sp, tp);
    }
    case SurfaceSpec::Kind::custom_mesh: {
      if (predictor >= spec.mesh.size()) throw InvalidArgument("custom surface: missing mesh for predictor");
      const RowMatrix& m = spec.mesh[predictor];
      if (m.rows() != w.rows() || m.cols() != w.cols())
        throw InvalidArgument("custom surface: mesh shape differs from the grids");
      return m;
    }
  }
  throw InvalidArgument("unknown surface spec");
}

RowMatrix sample_predictors(int n, const Grid& grid, Rng& rng) {
  constexpr int kTerms = 10;
  const auto pts = grid.points();
  RowMatrix x = RowMatrix::Zero(n, static_cast<Index>(pts.size()));
  for (int i = 0; i < n; ++i) {
    double alpha[kTerms], beta[kTerms];
    for (int m = 0; m < kTerms; ++m) {
      alpha[m] = rng.normal();
      beta[m] = rng.normal();
    }
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const double phase = 2.0 * std::numbers::pi * (pts[r] - grid.lo()) / grid.length();
      double v = 0.0;
      for (int m = 0; m < kTerms; ++m)
        v += (alpha[m] * std::sin((m + 1) * phase) + beta[m] * std::cos((m + 1) * phase)) / (m + 1);
      x(i, static_cast<Index>(r)) = v;
    }
  }
  return x;
}

RowMatrix sample_predictors(int n, const Grid& grid, std::uint64_t seed) {
  Rng rng(seed);
  return sample_predictors(n, grid, rng);
}

SimResult generate(const SimConfig& config) {
  config.validate();
  const Grid s_grid = make_uniform_grid(config.s_lo, config.s_hi, config.R);
  const Grid t_grid = make_uniform_grid(config.t_lo, config.t_hi, config.Q);
  const auto delta = s_grid.quad_weights();
  const auto J = static_cast<std::size_t>(config.J);

  FunctionalDataset ds{{}, std::vector<Grid>(J, s_grid), RowMatrix::Zero(config.n, config.Q), t_grid, {}};
  SimTruth truth;
  truth.linear_signal = RowMatrix::Zero(config.n, config.Q);
  Vector aggregate = Vector::Zero(config.n);
  for (std::size_t j = 0; j < J; ++j) {
    RowMatrix x = sample_predictors(config.n, s_grid, Rng::derive_seed(config.seed, 100 + j));
    RowMatrix w = make_true_surface(config.surface, j, s_grid, t_grid);
    // weighted(i, r) = Delta(s_r) x_ij(s_r); signal += weighted * w
    RowMatrix weighted = x;
    for (Index r = 0; r < weighted.cols(); ++r) weighted.col(r) *= delta[static_cast<std::size_t>(r)];
    truth.linear_signal.noalias() += weighted * w;
    for (Index r = 0; r < x.cols(); ++r) {
      const double phase = 2.0 * std::numbers::pi * (s_grid.points()[static_cast<std::size_t>(r)] - s_grid.lo()) / s_grid.length();
      aggregate += (2.0 / s_grid.length()) * std::sin(phase) * weighted.col(r);
    }
    ds.predictors.push_back(std::move(x));
    ds.names.push_back("x" + std::to_string(j + 1));
    truth.surfaces.push_back(std::move(w));
  }
  truth.noiseless = truth.linear_signal;
  if (config.nonlinear_amplitude > 0.0) {
    for (Index q = 0; q < config.Q; ++q) {
      const double tq = (t_grid.points()[static_cast<std::size_t>(q)] - t_grid.lo()) / t_grid.length();
      const double profile = std::sin(std::numbers::pi * tq);
      for (Index i = 0; i < config.n; ++i)
        truth.noiseless(i, q) += config.nonlinear_amplitude * std::sin(std::numbers::pi * aggregate(i)) * profile;
    }
  }
  const double mean = truth.noiseless.mean();
  const double var = (truth.noiseless.array() - mean).square().sum() / static_cast<double>(truth.noiseless.size());
  if (!(var > 0.0)) throw DegenerateData("generate: signal has zero variance");
  truth.noise_sd = std::sqrt(var / config.snr);
  Rng noise(Rng::derive_seed(config.seed, 1));
  for (Index i = 0; i < config.n; ++i)
    for (Index q = 0; q < config.Q; ++q) ds.outcome(i, q) = truth.noiseless(i, q) + truth.noise_sd * noise.normal();
  return {std::move(ds), std::move(truth)};
}

}  // namespace ssfr
