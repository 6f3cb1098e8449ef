// ssfr: command-line front end. Flags patch the run config; the merged
// document is validated before any command runs.

#include <cctype>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssfr/app.hpp"
#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace {

using ssfr::app::Json;

struct Bindings {
  std::vector<std::function<void(Json&)>> apply;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& path, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    apply.push_back([value, opt, path](Json& patch) {
      if (opt->count() > 0) patch[Json::json_pointer(path)] = *value;
    });
    return opt;
  }

  // Boolean switch that writes a fixed value when given.
  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& path, bool set_to,
                    const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, help);
    apply.push_back([opt, path, set_to](Json& patch) {
      if (opt->count() > 0) patch[Json::json_pointer(path)] = set_to;
    });
    return opt;
  }
};

// Bytes with an optional K/M/G suffix (powers of 1024).
std::size_t parse_bytes(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw ssfr::InvalidArgument("--memory-budget: '" + text + "' is not a byte count");
  }
  std::string suffix = text.substr(pos);
  for (auto& c : suffix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (suffix == "K" || suffix == "KB" || suffix == "KIB") return v << 10;
  if (suffix == "M" || suffix == "MB" || suffix == "MIB") return v << 20;
  if (suffix == "G" || suffix == "GB" || suffix == "GIB") return v << 30;
  if (!suffix.empty()) throw ssfr::InvalidArgument("--memory-budget: unknown suffix '" + suffix + "'");
  return v;
}

void add_data_flags(Bindings& b, CLI::App* sub) {
  b.add<std::string>(sub, "--data-dir", "/data/dir", "directory with x<j>.csv, y.csv, grids.json");
  b.add<std::vector<std::string>>(sub, "--predictors", "/data/predictors", "predictor CSV files");
  b.add<std::string>(sub, "--outcome", "/data/outcome", "outcome CSV file");
  b.add<std::string>(sub, "--grids", "/data/grids", "grid specification JSON");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-structured function-on-function regression"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, budget;
  unsigned long long seed = 0;
  int threads = 1;
  auto* o_config = app.add_option("--config", config_path, "JSON run configuration");
  auto* o_seed = app.add_option("--seed", seed, "base seed for every random stream");
  auto* o_threads = app.add_option("--threads", threads, "OpenMP threads for the kernels");
  auto* o_out = app.add_option("--out-dir", out_dir, "directory for all artifacts");
  auto* o_budget = app.add_option("--memory-budget", budget, "cap for dense intermediates (bytes, K/M/G suffix)");

  Bindings b;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset and its truth");
  b.add<int>(simulate, "--n", "/simulate/n", "number of curves");
  b.add<int>(simulate, "--R", "/simulate/R", "predictor grid size");
  b.add<int>(simulate, "--Q", "/simulate/Q", "outcome grid size");
  b.add<int>(simulate, "--J", "/simulate/J", "number of predictors");
  b.add<double>(simulate, "--snr", "/simulate/snr", "signal-to-noise variance ratio");
  b.add<std::string>(simulate, "--surface", "/simulate/surface", "bumps | planted_theta");
  b.add<double>(simulate, "--nonlinear-amplitude", "/simulate/nonlinear_amplitude", "amplitude of the nonlinear term");

  auto* fit = app.add_subcommand("fit", "train a model and write a checkpoint");
  add_data_flags(b, fit);
  b.add<int>(fit, "--K", "/model/num_s_basis", "predictor-direction basis size");
  b.add<int>(fit, "--U", "/model/num_t_basis", "outcome-direction basis size");
  b.add<int>(fit, "--degree", "/model/degree", "spline degree");
  b.add<std::string>(fit, "--link", "/model/link", "identity | exp | sigmoid");
  b.flag(fit, "--standardize", "/model/standardize", true, "standardize predictors on the training rows");
  b.add<std::string>(fit, "--deep", "/deep/architecture", "none | shared_codec | generic");
  b.add<std::vector<int>>(fit, "--hidden", "/deep/hidden_sizes", "hidden layer widths");
  b.add<std::string>(fit, "--activation", "/deep/activation", "identity | relu | tanh");
  b.add<double>(fit, "--dropout", "/deep/dropout_rate", "dropout rate of hidden layers");
  b.flag(fit, "--no-structured", "/train/structured", false, "freeze the structured part at zero");
  b.add<int>(fit, "--epochs", "/train/max_epochs", "maximum epochs");
  b.add<int>(fit, "--batch-size", "/train/batch_size", "mini-batch size");
  b.add<int>(fit, "--patience", "/train/patience", "early-stopping patience");
  b.add<double>(fit, "--lr", "/train/learning_rate", "Adam learning rate");
  b.add<double>(fit, "--lambda-s", "/train/lambda_s", "smoothing along s");
  b.add<double>(fit, "--lambda-t", "/train/lambda_t", "smoothing along t");
  b.add<double>(fit, "--val-fraction", "/train/validation_fraction", "early-stopping holdout share");
  b.add<double>(fit, "--test-fraction", "/train/test_fraction", "held-out test share");
  b.flag(fit, "--skip-degenerate", "/evaluate/skip_degenerate", true, "skip degenerate curves in metrics");

  auto* predict = app.add_subcommand("predict", "predict outcome curves from a checkpoint");
  add_data_flags(b, predict);
  b.add<std::string>(predict, "--model", "/predict/model", "checkpoint file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against observed curves");
  add_data_flags(b, evaluate);
  b.add<std::string>(evaluate, "--model", "/predict/model", "checkpoint file");
  b.add<std::string>(evaluate, "--predictions", "/predict/predictions", "prediction CSV instead of a checkpoint");
  b.flag(evaluate, "--skip-degenerate", "/evaluate/skip_degenerate", true, "skip degenerate curves with a warning");

  auto* pho = app.add_subcommand("pho", "post-hoc orthogonalization of a trained model");
  add_data_flags(b, pho);
  b.add<std::string>(pho, "--model", "/predict/model", "checkpoint file")->required();
  b.add<std::string>(pho, "--path", "/pho/path", "auto | svd | gram");
  b.add<int>(pho, "--mesh-size", "/surfaces/mesh_size", "surface mesh points per axis");

  auto* surfaces = app.add_subcommand("surfaces", "export weight surfaces of a checkpoint");
  b.add<std::string>(surfaces, "--model", "/predict/model", "checkpoint file")->required();
  b.add<int>(surfaces, "--mesh-size", "/surfaces/mesh_size", "mesh points per axis");
  b.flag(surfaces, "--uncorrected", "/surfaces/corrected", false, "ignore orthogonalized coefficients");

  auto* bench = app.add_subcommand("bench", "memory and time scaling of array vs naive fitting");
  b.add<std::vector<int>>(bench, "--n", "/bench/n", "curve counts");
  b.add<std::vector<int>>(bench, "--J", "/bench/J", "predictor counts");
  b.add<std::vector<int>>(bench, "--R", "/bench/R", "grid sizes (R = Q)");
  b.add<int>(bench, "--epochs", "/bench/epochs", "array-path epochs");
  b.add<int>(bench, "--batch-size", "/bench/batch_size", "array-path batch size");
  b.add<int>(bench, "--num-basis", "/bench/num_basis", "basis size in both directions");
  b.flag(bench, "--no-naive", "/bench/naive", false, "skip the naive path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    Json config = ssfr::app::default_config();
    if (o_config->count() > 0) ssfr::app::merge_config(config, ssfr::app::load_config_file(config_path), config_path);
    Json patch = Json::object();
    for (const auto& apply : b.apply) apply(patch);
    if (o_seed->count() > 0) patch["seed"] = seed;
    if (o_threads->count() > 0) patch["threads"] = threads;
    if (o_out->count() > 0) patch["out_dir"] = out_dir;
    if (o_budget->count() > 0) patch["memory_budget"] = parse_bytes(budget);
    ssfr::app::merge_config(config, patch, "command line");
    ssfr::app::resolve_config(config);
    ssfr::app::validate_config(config);
    ssfr::kernels::set_thread_count(config.at("threads").get<int>());

    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "simulate") return ssfr::app::cmd_simulate(config);
    if (verb == "fit") return ssfr::app::cmd_fit(config);
    if (verb == "predict") return ssfr::app::cmd_predict(config);
    if (verb == "evaluate") return ssfr::app::cmd_evaluate(config);
    if (verb == "pho") return ssfr::app::cmd_pho(config);
    if (verb == "surfaces") return ssfr::app::cmd_surfaces(config);
    if (verb == "bench") return ssfr::app::cmd_bench(config);
    return 1;
  } catch (...) {
    return ssfr::app::exit_code_for(std::current_exception());
  }
}
