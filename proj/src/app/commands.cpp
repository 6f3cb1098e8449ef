#include <cmath>
#include <cstdio>
#include <sstream>

#include "ssfr/app.hpp"
#include "ssfr/error.hpp"
#include "ssfr/io.hpp"
#include "ssfr/metrics.hpp"

namespace ssfr::app {

namespace fs = std::filesystem;

namespace {

void echo_config(const Json& config) { io::atomic_write(out_dir(config) / "config.json", config.dump(2) + "\n"); }

Json parse_report(const std::string& text) { return Json::parse(text); }

std::vector<double> mesh_points(double lo, double hi, int count) {
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    pts[static_cast<std::size_t>(i)] = (i == count - 1) ? hi : lo + (hi - lo) * i / (count - 1);
  return pts;
}

// Long layout: one "s,t,w" row per mesh point, s varying slowest.
std::string surface_csv(const std::vector<double>& s, const std::vector<double>& t, const RowMatrix& w) {
  std::string out = "s,t,w\n";
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < t.size(); ++b) {
      out += io::format_double(s[a]);
      out += ',';
      out += io::format_double(t[b]);
      out += ',';
      out += io::format_double(w(static_cast<Index>(a), static_cast<Index>(b)));
      out += '\n';
    }
  return out;
}

Json knots_json(const BasisSystem& b) {
  Json k = Json::array();
  for (double v : b.knots()) k.push_back(v);
  return k;
}

// Writes surface_<prefix><j>.csv for every term of `part` and returns the meta entries.
Json write_surfaces(const StructuredPart& part, int mesh, const fs::path& dir, const std::string& prefix) {
  const BasisSystem& tb = *part.t_basis;
  const auto t = mesh_points(tb.lo(), tb.hi(), mesh);
  Json terms = Json::array();
  for (std::size_t j = 0; j < part.terms.size(); ++j) {
    const auto& term = part.terms[j];
    const auto s = mesh_points(term.s_basis->lo(), term.s_basis->hi(), mesh);
    const RowMatrix w = surface(term.theta, *term.s_basis, tb, s, t);
    const std::string file = "surface_" + prefix + std::to_string(term.predictor_index + 1) + ".csv";
    io::atomic_write(dir / file, surface_csv(s, t, w));
    terms.push_back({{"predictor", term.predictor_index + 1},
                     {"file", file},
                     {"num_s_basis", term.s_basis->num_basis()},
                     {"degree", term.s_basis->degree()},
                     {"s_knots", knots_json(*term.s_basis)}});
  }
  return terms;
}

// Predictors from the data section; the outcome is optional for prediction.
FunctionalDataset load_predictors(const Json& config, const SemiStructuredModel& model) {
  const DataPaths p = data_paths(config);
  if (fs::exists(p.outcome)) return load_data(config);
  if (!fs::exists(p.grids)) throw IoError("cannot open " + p.grids.string());
  GridSpec grids = load_grid_spec(p.grids, p.predictors.size());
  FunctionalDataset ds{{}, grids.predictor_grids, RowMatrix(), model.outcome_grid, {}};
  for (const auto& path : p.predictors) {
    ds.predictors.push_back(io::read_csv(path).values);
    ds.names.push_back(path.stem().string());
  }
  const Index n = ds.predictors.empty() ? 0 : ds.predictors.front().rows();
  for (std::size_t j = 0; j < ds.predictors.size(); ++j)
    if (ds.predictors[j].rows() != n)
      throw FormatError(p.predictors[j].string() + ": row count differs from " + p.predictors[0].string());
  ds.outcome = RowMatrix::Zero(n, static_cast<Index>(model.outcome_grid.size()));
  return ds;
}

SemiStructuredModel load_model_from(const Json& config) {
  const std::string path = config.at("predict").at("model").get<std::string>();
  if (path.empty()) throw InvalidArgument("config: 'predict.model' names no checkpoint");
  return load_model(path);
}

}  // namespace

int cmd_simulate(const Json& config) {
  const SimConfig cfg = sim_config(config);
  const SimResult sim = generate(cfg);
  const fs::path dir = out_dir(config);
  save_dataset(sim.data, dir);
  for (std::size_t j = 0; j < sim.truth.surfaces.size(); ++j)
    io::atomic_write(dir / "truth" / ("surface_" + std::to_string(j + 1) + ".csv"), io::to_csv(sim.truth.surfaces[j]));
  io::atomic_write(dir / "truth" / "noiseless.csv", io::to_csv(sim.truth.noiseless));
  io::atomic_write(dir / "truth" / "linear_signal.csv", io::to_csv(sim.truth.linear_signal));
  const Json truth{{"noise_sd", sim.truth.noise_sd},
                   {"surface", to_string(cfg.surface.kind)},
                   {"surface_layout", "rows follow the predictor grid, columns the outcome grid"}};
  io::atomic_write(dir / "truth" / "truth.json", truth.dump(2) + "\n");
  echo_config(config);
  std::printf("simulate: n=%d J=%d R=%d Q=%d snr=%g noise_sd=%s -> %s\n", cfg.n, cfg.J, cfg.R, cfg.Q, cfg.snr,
              io::format_double(sim.truth.noise_sd).c_str(), dir.string().c_str());
  return 0;
}

int cmd_fit(const Json& config) {
  const FunctionalDataset ds = load_data(config);
  const fs::path dir = out_dir(config);
  const double test_fraction = config.at("train").at("test_fraction").get<double>();
  SplitIndices rows;
  if (test_fraction > 0.0) {
    rows = split_indices(static_cast<std::size_t>(ds.n()), test_fraction, split_seed(config));
  } else {
    for (Index i = 0; i < ds.n(); ++i) rows.train.push_back(static_cast<std::size_t>(i));
  }
  const FunctionalDataset train_ds = ds.subset(rows.train);

  SemiStructuredModel model = build_model(train_ds, model_spec(config));
  if (config.at("model").at("standardize").get<bool>()) {
    std::vector<std::size_t> all(rows.train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    model.standardizer = fit_standardizer(train_ds, all);
  }

  std::string log;
  const auto on_epoch = [&log](const EpochRecord& r) { log += epoch_json_line(r); };
  const TrainConfig tcfg = train_config(config);
  TrainReport report;
  try {
    report = train(model, train_ds, tcfg, on_epoch);
  } catch (const TrainingFailure&) {
    io::atomic_write(dir / "train_log.jsonl", log);
    throw;
  }
  io::atomic_write(dir / "train_log.jsonl", log);
  save_model(model, dir / "model.ckpt");

  const bool skip = config.at("evaluate").at("skip_degenerate").get<bool>();
  const auto xi = model.outcome_grid.quad_weights();
  const ModelInputs train_inputs = prepare_inputs(model, train_ds);
  Json metrics;
  metrics["training"] = {{"initial_train_risk", report.initial_train_risk},
                         {"initial_validation_risk", report.initial_val_risk},
                         {"final_train_risk", evaluate_risk(model, train_inputs, xi)},
                         {"best_epoch", report.best_epoch},
                         {"stopped_epoch", report.stopped_epoch},
                         {"best_validation_risk", report.best_validation_risk},
                         {"num_train", rows.train.size()},
                         {"num_test", rows.test.size()}};
  metrics["train"] = parse_report(evaluate(train_ds.outcome, predict(model, train_inputs), xi, skip).to_json());
  if (!rows.test.empty()) {
    const FunctionalDataset test_ds = ds.subset(rows.test);
    metrics["test"] = parse_report(evaluate(test_ds.outcome, predict(model, test_ds), xi, skip).to_json());
  }
  io::atomic_write(dir / "metrics.json", metrics.dump(2) + "\n");
  echo_config(config);
  std::printf("fit: %zu train / %zu test rows, %d epochs (best %d), train risk %s -> %s\n", rows.train.size(),
              rows.test.size(), report.stopped_epoch, report.best_epoch,
              io::format_double(metrics["training"]["final_train_risk"].get<double>()).c_str(),
              (dir / "model.ckpt").string().c_str());
  return 0;
}

int cmd_predict(const Json& config) {
  const SemiStructuredModel model = load_model_from(config);
  const FunctionalDataset ds = load_predictors(config, model);
  const fs::path dir = out_dir(config);
  const RowMatrix mu = predict(model, ds);
  io::atomic_write(dir / "predictions.csv", io::to_csv(mu));
  echo_config(config);
  std::printf("predict: %ld curves x %ld points -> %s\n", static_cast<long>(mu.rows()), static_cast<long>(mu.cols()),
              (dir / "predictions.csv").string().c_str());
  return 0;
}

int cmd_evaluate(const Json& config) {
  const FunctionalDataset ds = load_data(config);
  const fs::path dir = out_dir(config);
  const std::string pred_path = config.at("predict").at("predictions").get<std::string>();
  RowMatrix mu;
  std::span<const double> xi = ds.outcome_grid.quad_weights();
  if (!pred_path.empty()) {
    mu = io::read_csv(pred_path).values;
    if (mu.rows() != ds.outcome.rows() || mu.cols() != ds.outcome.cols())
      throw FormatError(pred_path + ": shape differs from the outcome");
  } else {
    mu = predict(load_model_from(config), ds);
  }
  const EvalReport report = evaluate(ds.outcome, mu, xi, config.at("evaluate").at("skip_degenerate").get<bool>());
  io::atomic_write(dir / "eval.json", report.to_json());
  io::atomic_write(dir / "per_curve.csv", report.per_curve_csv());
  if (!report.skipped_rows.empty())
    std::fprintf(stderr, "warning: skipped %zu degenerate curve(s)\n", report.skipped_rows.size());
  echo_config(config);
  std::printf("evaluate: functional_r2=%s rel_rmse=%s -> %s\n", io::format_double(report.functional_r2).c_str(),
              io::format_double(report.rel_rmse).c_str(), (dir / "eval.json").string().c_str());
  return 0;
}

// Rows fit trained on: the same seeded split when a test share is configured.
static FunctionalDataset training_rows(const Json& config, const FunctionalDataset& ds) {
  const double test_fraction = config.at("train").at("test_fraction").get<double>();
  if (!(test_fraction > 0.0)) return ds;
  return ds.subset(split_indices(static_cast<std::size_t>(ds.n()), test_fraction, split_seed(config)).train);
}

static Json term_norms(const StructuredPart& before, const StructuredPart& after) {
  Json terms = Json::array();
  terms.push_back({{"term", "intercept"}, {"norm_before", before.intercept.norm()}, {"norm_after", after.intercept.norm()}});
  for (std::size_t j = 0; j < before.terms.size(); ++j)
    terms.push_back({{"term", "x" + std::to_string(before.terms[j].predictor_index + 1)},
                     {"norm_before", before.terms[j].theta.norm()},
                     {"norm_after", after.terms[j].theta.norm()}});
  return terms;
}

int cmd_pho(const Json& config) {
  SemiStructuredModel model = load_model_from(config);
  const FunctionalDataset ds = training_rows(config, load_data(config));
  const fs::path dir = out_dir(config);
  const int mesh = config.at("surfaces").at("mesh_size").get<int>();
  const ModelInputs inputs = prepare_inputs(model, ds);
  const PredictionParts parts = predict_parts(model, inputs);
  const RowMatrix before = apply_link(model.link, parts.lambda_plus + parts.lambda_minus);
  io::atomic_write(dir / "predictions_before.csv", io::to_csv(before));

  Json report;
  if (!model.deep) {
    std::fprintf(stderr, "warning: checkpoint has no deep part; nothing to orthogonalize\n");
    model.corrected = model.structured;
    io::atomic_write(dir / "predictions_after.csv", io::to_csv(before));
    report = {{"skipped", true}, {"reason", "no deep part"}, {"rank", 0}, {"residual_norm", 0.0}};
  } else {
    const Index n = inputs.n;
    const Index big_n = n * model.num_outputs();
    PhoPath path = pho_path(config);
    if (path == PhoPath::automatic) path = big_n > 50000 ? PhoPath::gram : PhoPath::svd;
    const PhoResult result =
        post_hoc_orthogonalize(model.structured, inputs.encoded, parts.lambda_minus, path, memory_budget(config));
    model.corrected = result.corrected;
    const RowMatrix after =
        apply_link(model.link, structured_forward(result.corrected, inputs.encoded, n) + result.lambda_perp);
    io::atomic_write(dir / "predictions_after.csv", io::to_csv(after));
    const double lm_norm = parts.lambda_minus.norm();
    const double tol = 1e-8 * (1.0 + lm_norm);
    report = {{"skipped", false},
              {"path", path == PhoPath::gram ? "gram" : "svd"},
              {"n", n},
              {"num_coefficients", stack_coefficients(model.structured).size()},
              {"rank", result.rank},
              {"lambda_minus_norm", lm_norm},
              {"lambda_perp_norm", result.lambda_perp.norm()},
              {"residual_norm", result.residual_norm},
              {"residual_tolerance", tol},
              {"residual_within_tolerance", result.residual_norm <= tol},
              {"max_prediction_change", (after - before).cwiseAbs().maxCoeff()}};
    if (result.residual_norm > tol)
      std::fprintf(stderr, "warning: residual norm %g exceeds tolerance %g\n", result.residual_norm, tol);
  }
  report["coefficient_norms"] = term_norms(model.structured, *model.corrected);
  report["original_surfaces"] = write_surfaces(model.structured, mesh, dir, "original_");
  report["corrected_surfaces"] = write_surfaces(*model.corrected, mesh, dir, "corrected_");
  save_model(model, dir / "model_pho.ckpt");
  io::atomic_write(dir / "pho_report.json", report.dump(2) + "\n");
  echo_config(config);
  std::printf("pho: rank %ld, residual %s -> %s\n", static_cast<long>(report["rank"].get<Index>()),
              io::format_double(report["residual_norm"].get<double>()).c_str(),
              (dir / "model_pho.ckpt").string().c_str());
  return 0;
}

int cmd_surfaces(const Json& config) {
  const SemiStructuredModel model = load_model_from(config);
  const fs::path dir = out_dir(config);
  const int mesh = config.at("surfaces").at("mesh_size").get<int>();
  const bool use_corrected = config.at("surfaces").at("corrected").get<bool>() && model.corrected.has_value();
  const StructuredPart& part = use_corrected ? *model.corrected : model.structured;
  Json meta;
  meta["corrected"] = use_corrected;
  meta["mesh_size"] = mesh;
  meta["num_t_basis"] = part.t_basis->num_basis();
  meta["t_degree"] = part.t_basis->degree();
  meta["t_knots"] = knots_json(*part.t_basis);
  meta["layout"] = "long: one row per (s, t) with s varying slowest";
  meta["terms"] = write_surfaces(part, mesh, dir, "");
  io::atomic_write(dir / "surface_meta.json", meta.dump(2) + "\n");
  echo_config(config);
  std::printf("surfaces: %zu term(s)%s -> %s\n", part.terms.size(), use_corrected ? " (corrected)" : "",
              dir.string().c_str());
  return 0;
}

int cmd_bench(const Json& config) {
  const auto rows = run_bench(config);
  const fs::path dir = out_dir(config);
  io::atomic_write(dir / "bench.csv", bench_csv(rows));
  echo_config(config);
  std::printf("bench: %zu rows -> %s\n", rows.size(), (dir / "bench.csv").string().c_str());
  return 0;
}

}  // namespace ssfr::app
