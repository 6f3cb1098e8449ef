#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssfr/model.hpp"
#include "ssfr/pho.hpp"
#include "ssfr/simgen.hpp"
#include "ssfr/training.hpp"

namespace ssfr::app {

using Json = nlohmann::json;

/// Complete run configuration with every key at its default. A config file
/// and command-line flags are merged on top; the result is echoed into the
/// output directory as config.json.
Json default_config();

/// Parses a config file. Syntax errors carry the file name, line and column.
Json load_config_file(const std::filesystem::path& path);

/// Recursively overlays `patch` onto `base`. Keys unknown to `base` and
/// values of the wrong JSON type raise InvalidArgument naming the field path
/// (e.g. "train.learning_rate").
void merge_config(Json& base, const Json& patch, const std::string& source = "config");

/// Fills values whose default depends on other keys: train.learning_rate
/// is 1e-2 without a deep part and 1e-3 with one unless given.
void resolve_config(Json& config);

/// Semantic checks of every section (ranges, enum names).
void validate_config(const Json& config);

struct DataPaths {
  std::vector<std::filesystem::path> predictors;
  std::filesystem::path outcome;
  std::filesystem::path grids;
};

SimConfig sim_config(const Json& config);
TrainConfig train_config(const Json& config);
ModelSpec model_spec(const Json& config);
DataPaths data_paths(const Json& config);
/// Seed of the train/test split in fit.
std::uint64_t split_seed(const Json& config);
PhoPath pho_path(const Json& config);
std::filesystem::path out_dir(const Json& config);
std::size_t memory_budget(const Json& config);

/// Loads the dataset named by the "data" section.
FunctionalDataset load_data(const Json& config);

// Commands. Each writes its artifacts into out_dir(config) and returns 0.
int cmd_simulate(const Json& config);
int cmd_fit(const Json& config);
int cmd_predict(const Json& config);
int cmd_evaluate(const Json& config);
int cmd_pho(const Json& config);
int cmd_surfaces(const Json& config);
int cmd_bench(const Json& config);

/// One bench cell: peak heap above the starting level and wall time.
struct BenchRow {
  int n = 0;
  int J = 0;
  int R = 0;
  int Q = 0;
  std::string path;    // "array" or "naive"
  std::string status;  // "ok" or "over_budget"
  std::size_t peak_bytes = 0;
  std::size_t cache_bytes = 0;  // array path: encoded rows held for the whole fit
  double seconds = 0.0;
};

std::vector<BenchRow> run_bench(const Json& config);
std::string bench_csv(const std::vector<BenchRow>& rows);

/// 1 usage/config, 2 numerical failure, 3 IO; prints a diagnostic to stderr.
int exit_code_for(const std::exception_ptr& error);

}  // namespace ssfr::app
