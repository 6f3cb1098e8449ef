// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ssfr/dataset.hpp"
#include "ssfr/grid.hpp"
#include "ssfr/io.hpp"
#include "ssfr/metrics.hpp"
#include "ssfr/model.hpp"
#include "ssfr/pho.hpp"
#include "ssfr/simgen.hpp"
#include "ssfr/structured.hpp"
#include "ssfr/training.hpp"

#ifndef SSFR_CLI_PATH
#error "SSFR_CLI_PATH must name the ssfr executable"
#endif

namespace fs = std::filesystem;
using namespace ssfr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Estimated surface of term j on the simulation grids.
RowMatrix fitted_surface(const StructuredPart& part, std::size_t j, const FunctionalDataset& ds) {
  const auto& term = part.terms[j];
  return surface(term.theta, *term.s_basis, *part.t_basis, ds.predictor_grids[term.predictor_index].points(),
                 ds.outcome_grid.points());
}

double surface_err(const SimResult& sim, const StructuredPart& part, std::size_t j = 0) {
  const auto& ds = sim.data;
  return surface_error(sim.truth.surfaces[j], fitted_surface(part, j, ds), ds.predictor_grids[j].quad_weights(),
                       ds.outcome_grid.quad_weights());
}

TrainConfig structured_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.smoothing = {1e-4, 1e-4};
  tc.seed = seed;
  return tc;
}

double fit_bumps(double snr, std::uint64_t seed) {
  SimConfig sc;
  sc.seed = seed;
  sc.snr = snr;
  const SimResult sim = generate(sc);
  SemiStructuredModel model = build_model(sim.data, ModelSpec{});
  train(model, sim.data, structured_train(seed));
  return surface_err(sim, model.structured);
}

Outcome surface_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const double bumps = fit_bumps(1.0, 1);

  SimConfig sc;
  sc.seed = 1;
  sc.snr = 10.0;
  sc.surface.kind = SurfaceSpec::Kind::planted_theta;
  const SimResult sim = generate(sc);
  ModelSpec spec;
  spec.num_s_basis = sc.surface.num_s_basis;
  spec.num_t_basis = sc.surface.num_t_basis;
  SemiStructuredModel model = build_model(sim.data, spec);
  TrainConfig tc = structured_train(1);
  tc.smoothing = {0.0, 0.0};
  train(model, sim.data, tc);
  const double planted = surface_err(sim, model.structured);
  const double secs = seconds_since(t0);
  return {bumps <= 0.30 && planted <= 0.10 && secs <= 300.0,
          "bumps SNR=1 error " + fmt("%.4f", bumps) + " (<= 0.30), planted SNR=10 error " + fmt("%.4f", planted) +
              " (<= 0.10), " + fmt("%.1f", secs) + " s"};
}

Outcome snr_ordering() {
  double hi = 0.0, lo = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    hi += fit_bumps(1.0, seed) / 5.0;
    lo += fit_bumps(0.1, seed) / 5.0;
  }
  return {hi < lo, "mean error SNR=1 " + fmt("%.4f", hi) + " < SNR=0.1 " + fmt("%.4f", lo)};
}

DeepConfig codec(std::uint64_t seed) {
  DeepConfig dc;
  dc.architecture = Architecture::shared_codec;
  dc.hidden_sizes = {64};
  dc.activation = Activation::relu;
  dc.seed = seed;
  return dc;
}

// Dataset whose predictors are iid normal on each grid point, so the
// stacked basis matrix has full column rank.
FunctionalDataset white_noise_data(int n, int r, int q, int j_count, std::uint64_t seed) {
  Rng rng(seed);
  const Grid sg = make_uniform_grid(0.0, 1.0, r);
  const Grid tg = make_uniform_grid(0.0, 1.0, q);
  FunctionalDataset ds{{}, {}, RowMatrix(n, q), tg, {}};
  for (int j = 0; j < j_count; ++j) {
    RowMatrix x(n, r);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    ds.predictors.push_back(x);
    ds.predictor_grids.push_back(sg);
  }
  for (Index i = 0; i < ds.outcome.size(); ++i) ds.outcome.data()[i] = rng.normal();
  return ds;
}

Outcome pho_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig sc;
  sc.n = 256;
  sc.R = sc.Q = 40;
  sc.snr = 5.0;
  sc.nonlinear_amplitude = 0.3;
  sc.surface.kind = SurfaceSpec::Kind::planted_theta;
  const SimResult sim = generate(sc);
  ModelSpec spec;
  spec.num_s_basis = spec.num_t_basis = 8;
  spec.deep = codec(3);
  SemiStructuredModel model = build_model(sim.data, spec);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.max_epochs = 30;
  train(model, sim.data, tc);

  const ModelInputs inputs = prepare_inputs(model, sim.data);
  const PredictionParts parts = predict_parts(model, inputs);
  const PhoResult res = post_hoc_orthogonalize(model.structured, inputs.encoded, parts.lambda_minus);
  const double residual_bound = 1e-8 * (1.0 + parts.lambda_minus.norm());
  const RowMatrix before = parts.lambda_plus + parts.lambda_minus;
  const RowMatrix after = structured_forward(res.corrected, inputs.encoded) + res.lambda_perp;
  const double pred_rel = (after - before).norm() / std::max(before.norm(), 1e-300);

  // Planted correction on a full-rank instance.
  const FunctionalDataset wn = white_noise_data(60, 30, 12, 2, 17);
  ModelSpec small;
  small.num_s_basis = small.num_t_basis = 4;
  SemiStructuredModel sm = build_model(wn, small);
  Rng rng(5);
  for (auto& term : sm.structured.terms)
    for (Index i = 0; i < term.theta.size(); ++i) term.theta.data()[i] = rng.normal();
  for (Index i = 0; i < sm.structured.intercept.size(); ++i) sm.structured.intercept(i) = rng.normal();
  const auto enc = encode_terms(sm.structured, wn);
  const Vector theta = stack_coefficients(sm.structured);
  Vector c(theta.size());
  for (Index i = 0; i < c.size(); ++i) c(i) = rng.normal();
  const RowMatrix lm = omega_times(sm.structured, enc, sm.structured.t_basis->eval_matrix(), c, wn.n());
  const OmegaMatrix omega = assemble_omega(sm.structured, enc, sm.structured.t_basis->eval_matrix(), wn.n());
  const PhoResult planted = pho_correct(omega, theta, lm);
  const double c_err = (planted.theta_corrected - theta - c).cwiseAbs().maxCoeff();
  const bool full_rank = planted.rank == theta.size();
  const double secs = seconds_since(t0);

  const bool ok = res.residual_norm <= residual_bound && pred_rel <= 1e-8 && full_rank && c_err <= 1e-7 && secs <= 60.0;
  return {ok, "residual " + fmt("%.2e", res.residual_norm) + " (<= " + fmt("%.2e", residual_bound) +
                  "), prediction change " + fmt("%.2e", pred_rel) + " (<= 1e-8), planted |dtheta - c| " +
                  fmt("%.2e", c_err) + " (<= 1e-7" + (full_rank ? "" : ", NOT full rank") + "), " +
                  fmt("%.1f", secs) + " s"};
}

Outcome pho_reattribution() {
  SimConfig sc;
  sc.R = sc.Q = 50;
  sc.snr = 10.0;
  sc.surface.kind = SurfaceSpec::Kind::planted_theta;
  const SimResult sim = generate(sc);
  ModelSpec spec;
  spec.num_s_basis = spec.num_t_basis = 8;
  spec.deep = codec(7);
  SemiStructuredModel model = build_model(sim.data, spec);
  TrainConfig tc;
  tc.train_structured = false;
  tc.learning_rate = 1e-3;
  tc.smoothing = {0.0, 0.0};
  train(model, sim.data, tc);

  const ModelInputs inputs = prepare_inputs(model, sim.data);
  const PredictionParts parts = predict_parts(model, inputs);
  const PhoResult res = post_hoc_orthogonalize(model.structured, inputs.encoded, parts.lambda_minus);
  const double corrected = surface_err(sim, res.corrected);
  const double uncorrected = surface_err(sim, model.structured);
  return {corrected <= 0.25 && uncorrected >= 0.9,
          "corrected error " + fmt("%.4f", corrected) + " (<= 0.25), uncorrected " + fmt("%.4f", uncorrected) +
              " (>= 0.9)"};
}

Outcome semi_beats_components() {
  double structured = 0.0, semi = 0.0, deep = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig sc;
    sc.seed = seed;
    sc.R = sc.Q = 50;
    sc.snr = 10.0;
    sc.nonlinear_amplitude = 0.3;
    sc.surface.kind = SurfaceSpec::Kind::planted_theta;
    const SimResult sim = generate(sc);
    const auto [train_ds, test_ds] = split(sim.data, 0.2, Rng::derive_seed(seed, 11));
    for (int variant = 0; variant < 3; ++variant) {
      ModelSpec spec;
      spec.num_s_basis = spec.num_t_basis = 8;
      if (variant > 0) spec.deep = codec(Rng::derive_seed(seed, 10));
      SemiStructuredModel model = build_model(train_ds, spec);
      TrainConfig tc;
      tc.seed = seed;
      tc.max_epochs = 300;
      tc.patience = 50;
      tc.smoothing = {0.0, 0.0};
      tc.learning_rate = variant == 0 ? 1e-2 : 3e-3;
      tc.train_structured = variant != 2;
      train(model, train_ds, tc);
      const double r2 = functional_r2(test_ds.outcome, predict(model, test_ds), test_ds.outcome_grid.quad_weights());
      (variant == 0 ? structured : variant == 1 ? semi : deep) += r2 / 5.0;
    }
  }
  return {structured < semi && deep <= semi + 0.01,
          "mean test R2 structured " + fmt("%.4f", structured) + " < semi " + fmt("%.4f", semi) + ", deep " +
              fmt("%.4f", deep) + " <= semi + 0.01"};
}

void randomize(SemiStructuredModel& model, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Vector p = pack_parameters(model);
  for (Index i = 0; i < p.size(); ++i) p(i) = scale * rng.normal();
  unpack_parameters(model, p);
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig sc;
  sc.n = 24;
  sc.R = 20;
  sc.Q = 15;
  sc.J = 2;
  sc.seed = 4;
  const SimResult sim = generate(sc);
  ModelSpec spec;
  spec.num_s_basis = 5;
  spec.num_t_basis = 6;
  SemiStructuredModel structured = build_model(sim.data, spec);
  randomize(structured, 1, 0.5);
  const GradCheckReport gs = grad_check(structured, sim.data, 1e-6, {0.3, 0.7});

  DeepConfig dc;
  dc.hidden_sizes = {6, 5};
  dc.activation = Activation::tanh;
  dc.seed = 2;
  spec.deep = dc;
  SemiStructuredModel semi = build_model(sim.data, spec);
  randomize(semi, 3, 0.5);
  const GradCheckReport gd = grad_check(semi, sim.data, 1e-5, {0.3, 0.7});
  const double secs = seconds_since(t0);
  return {gs.passed && gs.max_relative_error <= 1e-6 && gd.passed && gd.max_relative_error <= 1e-5 && secs <= 30.0,
          "structured " + fmt("%.2e", gs.max_relative_error) + " (<= 1e-6, " + std::to_string(gs.num_params) +
              " params), with deep " + fmt("%.2e", gd.max_relative_error) + " (<= 1e-5, " +
              std::to_string(gd.num_params) + " params), " + fmt("%.1f", secs) + " s"};
}

Outcome quadrature_basis() {
  Rng rng(9);
  double weight_err = 0.0, unity_err = 0.0, penalty_err = 0.0, omega_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pts{rng.uniform(-2.0, 2.0)};
    const int m = 2 + static_cast<int>(rng.below(60));
    for (int i = 1; i < m; ++i) pts.push_back(pts.back() + rng.uniform(0.01, 0.5));
    const Grid g(pts);
    const auto w = g.quad_weights();
    weight_err = std::max(weight_err, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - g.length()));
    for (int degree = 0; degree <= 3; ++degree) {
      const BasisSystem b = bspline_basis(g, degree + 1 + static_cast<int>(rng.below(10)), degree);
      const Matrix e = b.eval_matrix();
      unity_err = std::max(unity_err, (e.colwise().sum().array() - 1.0).abs().maxCoeff());
      std::vector<double> probe(50);
      for (auto& x : probe) x = rng.uniform(g.lo(), g.hi());
      unity_err = std::max(unity_err, (b.evaluate(probe).colwise().sum().array() - 1.0).abs().maxCoeff());
    }
  }
  for (int trial = 0; trial < 10; ++trial) {
    const int u = 2 + static_cast<int>(rng.below(6)), k = 2 + static_cast<int>(rng.below(6));
    Matrix theta(u, k);
    for (Index i = 0; i < theta.size(); ++i) theta.data()[i] = rng.normal();
    const Matrix ps = first_difference_penalty(k), pt = first_difference_penalty(u);
    const double ls = rng.uniform(0.0, 3.0), lt = rng.uniform(0.0, 3.0);
    // vec(Theta) column-major; tr(Theta Ps Theta^T) = vec^T (Ps (x) I_U) vec.
    const Eigen::Map<const Vector> v(theta.data(), theta.size());
    Matrix ks = Matrix::Zero(u * k, u * k), kt = Matrix::Zero(u * k, u * k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) ks.block(a * u, b * u, u, u) = ps(a, b) * Matrix::Identity(u, u);
    for (int a = 0; a < k; ++a) kt.block(a * u, a * u, u, u) = pt;
    const double dense = ls * v.dot(ks * v) + lt * v.dot(kt * v);
    const double trace = penalty_quadratic(theta, ps, pt, ls, lt);
    penalty_err = std::max(penalty_err, std::abs(dense - trace) / (1.0 + std::abs(dense)));
  }
  {
    SimConfig sc;
    sc.n = 30;
    sc.R = 25;
    sc.Q = 20;
    sc.J = 3;
    const SimResult sim = generate(sc);
    ModelSpec spec;
    spec.num_s_basis = 6;
    spec.num_t_basis = 5;
    SemiStructuredModel model = build_model(sim.data, spec);
    randomize(model, 4, 1.0);
    const auto enc = encode_terms(model.structured, sim.data);
    const Matrix& psi = model.structured.t_basis->eval_matrix();
    const OmegaMatrix omega = assemble_omega(model.structured, enc, psi, sim.data.n());
    const Vector stacked = omega.values * stack_coefficients(model.structured);
    const RowMatrix fwd = structured_forward(model.structured, enc);
    const Eigen::Map<const Vector> flat(fwd.data(), fwd.size());
    omega_err = (stacked - flat).cwiseAbs().maxCoeff() / (1.0 + flat.cwiseAbs().maxCoeff());
  }
  return {weight_err <= 1e-12 && unity_err <= 1e-12 && penalty_err <= 1e-10 && omega_err <= 1e-12,
          "weights " + fmt("%.1e", weight_err) + ", partition of unity " + fmt("%.1e", unity_err) +
              ", penalty trace vs Kronecker " + fmt("%.1e", penalty_err) + ", Omega theta vs forward " +
              fmt("%.1e", omega_err)};
}

Outcome metric_oracles() {
  const Grid t = make_uniform_grid(0.0, 1.0, 101);
  RowMatrix y(3, 101);
  for (Index i = 0; i < 3; ++i)
    for (Index q = 0; q < 101; ++q) y(i, q) = static_cast<double>(i + 1) * t.points()[q];
  const auto xi = t.quad_weights();
  const double perfect = functional_r2(y, y, xi);
  const double zero = functional_r2(y, RowMatrix::Zero(3, 101), xi);
  const double half = functional_r2(y, 0.5 * y, xi);
  return {std::abs(perfect - 1.0) <= 1e-12 && std::abs(zero) <= 1e-12 && std::abs(half - 0.75) <= 1e-3,
          "perfect " + fmt("%.6f", perfect) + ", zero " + fmt("%.6f", zero) + ", half " + fmt("%.6f", half)};
}

// ---- command-line criteria ----

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + SSFR_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

Outcome bench_scaling(const fs::path& work) {
  const fs::path dir = work / "bench";
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli("--seed 1 --out-dir \"" + dir.string() + "\" bench", work / "bench.log");
  if (code != 0) return {false, "bench exited with " + std::to_string(code)};

  struct Cell {
    std::map<int, double> array, naive;
  };
  std::map<std::pair<int, int>, Cell> cells;  // (J, R) -> n -> peak
  std::stringstream in(io::read_text(dir / "bench.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = split_line(line);
    if (c.size() < 9) continue;
    auto& cell = cells[{std::stoi(c[1]), std::stoi(c[2])}];
    if (c[5] != "ok") return {false, "non-ok bench row: " + line};
    (c[4] == "array" ? cell.array : cell.naive)[std::stoi(c[0])] = std::stod(c[6]);
  }
  if (cells.size() != 9) return {false, "expected 9 (J, R) cells, got " + std::to_string(cells.size())};

  double worst_array = 0.0, worst_naive = 1e300;
  for (const auto& [key, cell] : cells) {
    const auto [j, r] = key;
    if (cell.array.size() != 3 || cell.naive.size() != 3) return {false, "missing n values in bench.csv"};
    worst_array = std::max(worst_array, cell.array.at(100) / std::max(cell.array.at(25), 1.0));
    // Each extra (curve, t) pair must add at least one design row of P doubles.
    const double p = 20.0 + j * 400.0;
    const double per_point = (cell.naive.at(100) - cell.naive.at(25)) / (75.0 * r);
    const bool monotone = cell.naive.at(25) < cell.naive.at(50) && cell.naive.at(50) < cell.naive.at(100);
    worst_naive = std::min(worst_naive, monotone ? per_point / (8.0 * p) : 0.0);
  }
  const double secs = seconds_since(t0);
  return {worst_array <= 2.0 && worst_naive >= 1.0,
          "array peak ratio n=100/n=25 " + fmt("%.3f", worst_array) + " (<= 2), naive bytes per (curve, t) / (8 P) " +
              fmt("%.3f", worst_naive) + " (>= 1), " + fmt("%.1f", secs) + " s"};
}

// All files under dir, keyed by relative path. The seconds fields are wall-clock
// measurements and are blanked before comparison.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    std::string text = io::read_text(e.path());
    if (rel.ends_with("train_log.jsonl")) {
      std::string out;
      std::stringstream ss(text);
      std::string line;
      while (std::getline(ss, line)) {
        const auto pos = line.find("\"seconds\":");
        if (pos != std::string::npos) line = line.substr(0, pos) + "}";
        out += line + "\n";
      }
      text = out;
    } else if (rel.ends_with("bench.csv")) {
      std::string out;
      std::stringstream ss(text);
      std::string line;
      while (std::getline(ss, line)) out += line.substr(0, line.rfind(',')) + "\n";
      text = out;
    }
    files[rel] = text;
  }
  return files;
}

Outcome determinism(const fs::path& work) {
  const fs::path dir = work / "det";
  const std::string out = " --threads 1 --seed 3 --out-dir \"" + dir.string();
  const std::vector<std::string> commands{
      out + "/data\" simulate --n 200 --R 30 --Q 30 --nonlinear-amplitude 0.3",
      out + "/fit\" fit --data-dir \"" + dir.string() + "/data\" --K 6 --U 6 --deep shared_codec --hidden 8 "
            "--dropout 0.1 --epochs 8",
      out + "/predict\" predict --data-dir \"" + dir.string() + "/data\" --model \"" + dir.string() +
          "/fit/model.ckpt\"",
      out + "/evaluate\" evaluate --data-dir \"" + dir.string() + "/data\" --model \"" + dir.string() +
          "/fit/model.ckpt\"",
      out + "/pho\" pho --data-dir \"" + dir.string() + "/data\" --model \"" + dir.string() + "/fit/model.ckpt\"",
      out + "/surfaces\" surfaces --mesh-size 20 --model \"" + dir.string() + "/pho/model_pho.ckpt\"",
      out + "/bench\" bench --n 10 20 --J 1 --R 12 --epochs 2 --num-basis 5",
  };
  std::map<std::string, std::string> first;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir);
    for (const auto& c : commands) {
      const int code = run_cli(c, work / "det.log");
      if (code != 0) return {false, "command failed with " + std::to_string(code) + ":" + c};
    }
    auto snap = snapshot(dir);
    if (round == 0) {
      first = std::move(snap);
      continue;
    }
    if (snap.size() != first.size()) return {false, "different file sets between runs"};
    for (const auto& [name, text] : snap) {
      const auto it = first.find(name);
      if (it == first.end()) return {false, "file only in second run: " + name};
      if (it->second != text) return {false, "artifact differs between runs: " + name};
    }
  }
  return {true, std::to_string(first.size()) + " artifacts byte-identical across two runs of " +
                    std::to_string(commands.size()) + " commands"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "ssfr_acceptance";
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"surface recovery", surface_recovery},
      {"SNR ordering", snr_ordering},
      {"PHO invariants", pho_invariants},
      {"PHO signal reattribution", pho_reattribution},
      {"semi-structured beats components", semi_beats_components},
      {"gradient correctness", gradient_correctness},
      {"quadrature and basis suite", quadrature_basis},
      {"metric oracles", metric_oracles},
      {"scaling", [&] { return bench_scaling(work); }},
      {"determinism", [&] { return determinism(work); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
