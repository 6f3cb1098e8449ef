#include <cmath>
#include <cstdio>

#include "ssfr/app.hpp"
#include "ssfr/error.hpp"
#include "ssfr/io.hpp"
#include "ssfr/rng.hpp"

namespace ssfr::app {

namespace {

// Derived seed streams for the parts of a run that draw randomness.
constexpr std::uint64_t kDeepInitStream = 10;
constexpr std::uint64_t kSplitStream = 11;

bool same_kind(const Json& expected, const Json& got) {
  if (expected.is_number_unsigned())
    return got.is_number_unsigned() || (got.is_number_integer() && got.get<std::int64_t>() >= 0);
  if (expected.is_number_integer()) return got.is_number_integer();
  if (expected.is_number()) return got.is_number();
  if (expected.is_array()) {
    if (!got.is_array()) return false;
    if (expected.empty()) return true;
    for (const auto& v : got)
      if (!same_kind(expected.front(), v)) return false;
    return true;
  }
  return expected.type() == got.type();
}

std::string kind_name(const Json& expected) {
  if (expected.is_number_unsigned()) return "a non-negative integer";
  if (expected.is_number_integer()) return "an integer";
  if (expected.is_number()) return "a number";
  if (expected.is_boolean()) return "a boolean";
  if (expected.is_string()) return "a string";
  if (expected.is_object()) return "an object";
  if (expected.is_array()) {
    if (expected.empty()) return "an array";
    const Json& e = expected.front();
    if (e.is_number_integer()) return "an array of integers";
    if (e.is_number()) return "an array of numbers";
    if (e.is_string()) return "an array of strings";
    return "an array";
  }
  return "null";
}

void merge_at(Json& base, const Json& patch, const std::string& prefix, const std::string& source) {
  if (!patch.is_object()) throw InvalidArgument(source + ": expected an object at '" + (prefix.empty() ? "<root>" : prefix) + "'");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string field = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw InvalidArgument(source + ": unknown key '" + field + "'");
    Json& target = base[it.key()];
    if (target.is_object()) {
      merge_at(target, it.value(), field, source);
    } else if (target.is_null()) {
      target = it.value();
    } else {
      if (!same_kind(target, it.value()))
        throw InvalidArgument(source + ": '" + field + "' must be " + kind_name(target));
      target = it.value();
    }
  }
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument("config: '" + field + "' " + what);
}

}  // namespace

Json default_config() {
  return Json::parse(R"({
    "seed": 1,
    "threads": 1,
    "out_dir": ".",
    "memory_budget": 1073741824,
    "data": {"dir": "", "predictors": [""], "outcome": "", "grids": ""},
    "model": {"num_s_basis": 20, "num_t_basis": 20, "degree": 3, "link": "identity", "standardize": false},
    "deep": {"architecture": "none", "hidden_sizes": [32], "activation": "relu", "dropout_rate": 0.0},
    "train": {"batch_size": 32, "max_epochs": 100, "patience": 10, "learning_rate": null,
              "lambda_s": 1.0, "lambda_t": 1.0, "validation_fraction": 0.2, "test_fraction": 0.2,
              "structured": true},
    "simulate": {"n": 1280, "R": 100, "Q": 100, "J": 1, "snr": 1.0, "surface": "bumps",
                 "num_s_basis": 8, "num_t_basis": 8, "degree": 3, "nonlinear_amplitude": 0.0},
    "predict": {"model": "", "predictions": ""},
    "evaluate": {"skip_degenerate": false},
    "pho": {"path": "auto"},
    "surfaces": {"mesh_size": 50, "corrected": true},
    "bench": {"n": [25, 50, 100], "J": [1, 2, 4], "R": [25, 50, 100], "epochs": 3, "batch_size": 16,
              "num_basis": 20, "naive": true}
  })");
}

Json load_config_file(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // e.what() already reports "at line L, column C".
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
}

void merge_config(Json& base, const Json& patch, const std::string& source) {
  merge_at(base, patch, "", source);
}

void resolve_config(Json& c) {
  Json& lr = c.at("train").at("learning_rate");
  if (lr.is_null()) lr = c.at("deep").at("architecture").get<std::string>() == "none" ? 1e-2 : 1e-3;
}

void validate_config(const Json& c) {
  require(c.at("train").at("learning_rate").is_number(), "train.learning_rate", "must be a number");
  require(c.at("threads").get<std::int64_t>() >= 1, "threads", "must be >= 1");
  require(c.at("memory_budget").get<std::int64_t>() >= 1, "memory_budget", "must be >= 1");

  const Json& m = c.at("model");
  require(m.at("num_s_basis").get<int>() >= 2, "model.num_s_basis", "must be >= 2");
  require(m.at("num_t_basis").get<int>() >= 2, "model.num_t_basis", "must be >= 2");
  require(m.at("degree").get<int>() >= 0, "model.degree", "must be >= 0");
  try {
    parse_link(m.at("link").get<std::string>());
  } catch (const InvalidArgument&) {
    require(false, "model.link", "must be one of identity, exp, sigmoid");
  }

  const Json& d = c.at("deep");
  const std::string arch = d.at("architecture").get<std::string>();
  require(arch == "none" || arch == "shared_codec" || arch == "generic", "deep.architecture",
          "must be one of none, shared_codec, generic");
  for (const auto& h : d.at("hidden_sizes")) require(h.get<int>() >= 1, "deep.hidden_sizes", "entries must be >= 1");
  try {
    parse_activation(d.at("activation").get<std::string>());
  } catch (const InvalidArgument&) {
    require(false, "deep.activation", "must be one of identity, relu, tanh");
  }
  const double rate = d.at("dropout_rate").get<double>();
  require(rate >= 0.0 && rate < 1.0, "deep.dropout_rate", "must lie in [0, 1)");

  const Json& t = c.at("train");
  const double tf = t.at("test_fraction").get<double>();
  require(tf >= 0.0 && tf < 1.0, "train.test_fraction", "must lie in [0, 1)");
  require(t.at("structured").get<bool>() || arch != "none", "train.structured",
          "cannot be false without a deep part");
  const Json& sim = c.at("simulate");
  const double snr = sim.at("snr").get<double>();
  require(snr > 0.0 && std::isfinite(snr), "simulate.snr", "must be > 0");
  require(sim.at("nonlinear_amplitude").get<double>() >= 0.0, "simulate.nonlinear_amplitude", "must be >= 0");
  try {
    train_config(c).validate();
    sim_config(c).validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }

  const std::string path = c.at("pho").at("path").get<std::string>();
  require(path == "auto" || path == "svd" || path == "gram", "pho.path", "must be one of auto, svd, gram");
  require(c.at("surfaces").at("mesh_size").get<int>() >= 2, "surfaces.mesh_size", "must be >= 2");

  const Json& b = c.at("bench");
  for (const char* key : {"n", "J", "R"}) {
    require(!b.at(key).empty(), std::string("bench.") + key, "must not be empty");
    for (const auto& v : b.at(key)) require(v.get<int>() >= 1, std::string("bench.") + key, "entries must be >= 1");
  }
  require(b.at("epochs").get<int>() >= 1, "bench.epochs", "must be >= 1");
  require(b.at("batch_size").get<int>() >= 1, "bench.batch_size", "must be >= 1");
  require(b.at("num_basis").get<int>() >= 4, "bench.num_basis", "must be >= 4");
}

SimConfig sim_config(const Json& c) {
  const Json& s = c.at("simulate");
  SimConfig cfg;
  cfg.n = s.at("n").get<int>();
  cfg.R = s.at("R").get<int>();
  cfg.Q = s.at("Q").get<int>();
  cfg.J = s.at("J").get<int>();
  cfg.snr = s.at("snr").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  try {
    cfg.surface.kind = parse_surface_kind(s.at("surface").get<std::string>());
  } catch (const InvalidArgument&) {
    throw InvalidArgument("config: 'simulate.surface' must be one of bumps, planted_theta");
  }
  if (cfg.surface.kind == SurfaceSpec::Kind::custom_mesh)
    throw InvalidArgument("config: 'simulate.surface' custom_mesh is only available through the library");
  cfg.surface.num_s_basis = s.at("num_s_basis").get<int>();
  cfg.surface.num_t_basis = s.at("num_t_basis").get<int>();
  cfg.surface.degree = s.at("degree").get<int>();
  cfg.nonlinear_amplitude = s.at("nonlinear_amplitude").get<double>();
  return cfg;
}

TrainConfig train_config(const Json& c) {
  const Json& t = c.at("train");
  TrainConfig cfg;
  cfg.batch_size = t.at("batch_size").get<int>();
  cfg.max_epochs = t.at("max_epochs").get<int>();
  cfg.patience = t.at("patience").get<int>();
  cfg.learning_rate = t.at("learning_rate").get<double>();
  cfg.smoothing.lambda_s = t.at("lambda_s").get<double>();
  cfg.smoothing.lambda_t = t.at("lambda_t").get<double>();
  cfg.validation_fraction = t.at("validation_fraction").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.train_structured = t.at("structured").get<bool>();
  return cfg;
}

ModelSpec model_spec(const Json& c) {
  const Json& m = c.at("model");
  ModelSpec spec;
  spec.num_s_basis = m.at("num_s_basis").get<int>();
  spec.num_t_basis = m.at("num_t_basis").get<int>();
  spec.degree = m.at("degree").get<int>();
  spec.link = parse_link(m.at("link").get<std::string>());
  const Json& d = c.at("deep");
  const std::string arch = d.at("architecture").get<std::string>();
  if (arch != "none") {
    DeepConfig dc;
    dc.architecture = parse_architecture(arch);
    dc.hidden_sizes = d.at("hidden_sizes").get<std::vector<int>>();
    dc.activation = parse_activation(d.at("activation").get<std::string>());
    dc.dropout_rate = d.at("dropout_rate").get<double>();
    dc.seed = Rng::derive_seed(c.at("seed").get<std::uint64_t>(), kDeepInitStream);
    spec.deep = dc;
  }
  return spec;
}

std::uint64_t split_seed(const Json& c) { return Rng::derive_seed(c.at("seed").get<std::uint64_t>(), kSplitStream); }

DataPaths data_paths(const Json& c) {
  const Json& d = c.at("data");
  DataPaths p;
  const std::filesystem::path dir = d.at("dir").get<std::string>();
  const auto explicit_preds = d.at("predictors").get<std::vector<std::string>>();
  const bool have_explicit = !(explicit_preds.empty() || (explicit_preds.size() == 1 && explicit_preds[0].empty()));
  p.grids = d.at("grids").get<std::string>();
  p.outcome = d.at("outcome").get<std::string>();
  if (!dir.empty()) {
    if (p.grids.empty()) p.grids = dir / "grids.json";
    if (p.outcome.empty()) p.outcome = dir / "y.csv";
  }
  if (p.grids.empty() || p.outcome.empty())
    throw InvalidArgument("config: 'data' needs either 'dir' or 'outcome' and 'grids'");
  if (have_explicit) {
    for (const auto& s : explicit_preds) p.predictors.emplace_back(s);
  } else if (!dir.empty()) {
    // x1.csv, x2.csv, ... as written by simulate
    for (int j = 1; std::filesystem::exists(dir / ("x" + std::to_string(j) + ".csv")); ++j)
      p.predictors.push_back(dir / ("x" + std::to_string(j) + ".csv"));
  }
  return p;
}

PhoPath pho_path(const Json& c) {
  const std::string p = c.at("pho").at("path").get<std::string>();
  if (p == "svd") return PhoPath::svd;
  if (p == "gram") return PhoPath::gram;
  return PhoPath::automatic;
}

std::filesystem::path out_dir(const Json& c) { return c.at("out_dir").get<std::string>(); }

std::size_t memory_budget(const Json& c) { return c.at("memory_budget").get<std::size_t>(); }

FunctionalDataset load_data(const Json& c) {
  const DataPaths p = data_paths(c);
  if (!std::filesystem::exists(p.grids)) throw IoError("cannot open " + p.grids.string());
  const GridSpec grids = load_grid_spec(p.grids, p.predictors.size());
  return load_csv(p.predictors, p.outcome, grids);
}

int exit_code_for(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const TrainingFailure& e) {
    std::fprintf(stderr, "numerical failure: %s (last finite epoch %d)\n", e.what(), e.last_finite_epoch());
    return 2;
  } catch (const DegenerateData& e) {
    if (e.row() >= 0)
      std::fprintf(stderr, "numerical failure: %s (row %ld)\n", e.what(), e.row());
    else
      std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const CapacityError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "numerical failure: out of memory\n");
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace ssfr::app
