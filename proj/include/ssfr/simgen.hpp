#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfr/dataset.hpp"
#include "ssfr/rng.hpp"

namespace ssfr {

/// Truth used to generate outcomes.
///
///   bumps          w(s,t) = sum_c a_c exp(-((s'-s_c)^2 + (t'-t_c)^2) / (2 sigma_c^2)),
///                  s', t' rescaled to [0,1]; (a, s_c, t_c, sigma) =
///                  (1.0, 0.5, 0.6, 0.10), (-0.5, 0.25, 0.6, 0.10), (-0.5, 0.75, 0.6, 0.10).
///                  Amplitudes sum to zero so the surface has (nearly) no s-mean,
///                  the one direction zero-mean predictors cannot observe.
///                  Predictor j uses s' for even j and 1 - s' for odd j, scaled by 1/(j+1).
///   planted_theta  w_j(s,t) = psi(t)^T Theta*_j phi(s) on clamped B-spline bases
///                  of the given sizes. Without explicit Theta*, the default is
///                  Theta*(u,k) = (cos(pi a) sin(pi b) + 0.5 a b) / (j+1) with
///                  a = k/(K-1), b = u/(U-1), each row then centred so that
///                  int w(s,t) ds = 0 for every t.
///   custom_mesh    one R x Q mesh per predictor, given on the simulation grids.
struct SurfaceSpec {
  enum class Kind { bumps, planted_theta, custom_mesh };
  Kind kind = Kind::bumps;
  int num_s_basis = 8;
  int num_t_basis = 8;
  int degree = 3;
  std::vector<Matrix> theta;     // planted_theta: U x K per predictor (optional)
  std::vector<RowMatrix> mesh;   // custom_mesh: R x Q per predictor
};

SurfaceSpec::Kind parse_surface_kind(const std::string& name);
std::string to_string(SurfaceSpec::Kind kind);

struct SimConfig {
  int n = 1280;
  int R = 100;
  int Q = 100;
  int J = 1;
  double snr = 1.0;
  std::uint64_t seed = 1;
  SurfaceSpec surface;
  double nonlinear_amplitude = 0.0;
  double s_lo = 0.0, s_hi = 1.0;
  double t_lo = 0.0, t_hi = 1.0;

  void validate() const;
};

/// R x Q mesh of w_j(s_r, t_q).
RowMatrix make_true_surface(const SurfaceSpec& spec, std::size_t predictor, const Grid& s_grid, const Grid& t_grid);

/// Default planted coefficients for predictor j (U x K).
Matrix default_planted_theta(int num_t_basis, int num_s_basis, std::size_t predictor, int degree = 3);

/// n x R curves x(s) = sum_{m=1}^{10} (alpha_m sin(2 pi m s'/|S|) + beta_m cos(2 pi m s'/|S|)) / m,
/// s' = s - lo, alpha, beta standard normal from `rng`.
RowMatrix sample_predictors(int n, const Grid& grid, Rng& rng);
/// Same, seeded.
RowMatrix sample_predictors(int n, const Grid& grid, std::uint64_t seed);

struct SimTruth {
  std::vector<RowMatrix> surfaces;  // R x Q per predictor
  RowMatrix linear_signal;          // n x Q, quadrature of surfaces against predictors
  RowMatrix noiseless;              // linear_signal plus the nonlinear term
  double noise_sd = 0.0;
};

struct SimResult {
  FunctionalDataset data;
  SimTruth truth;
};

/// signal_i(t_q) = sum_j sum_r Delta(s_r) w_j(s_r, t_q) x_ij(s_r)
///                 + amplitude * sin(pi z_i) * sin(pi t'_q),
/// z_i = sum_j (2/|S|) int x_ij(s) sin(2 pi s'/|S|) ds (quadrature).
/// Noise: iid N(0, var(signal)/snr) with var over all n*Q signal cells.
SimResult generate(const SimConfig& config);

}  // namespace ssfr
