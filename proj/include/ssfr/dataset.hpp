#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssfr/grid.hpp"
#include "ssfr/types.hpp"

namespace ssfr {

/// J functional predictors (each n x R_j on its own grid) and a functional
/// outcome (n x Q on the outcome grid), all in wide layout.
struct FunctionalDataset {
  std::vector<RowMatrix> predictors;
  std::vector<Grid> predictor_grids;
  RowMatrix outcome;
  Grid outcome_grid;
  std::vector<std::string> names;

  Index n() const { return outcome.rows(); }
  std::size_t num_predictors() const { return predictors.size(); }

  /// Throws InvalidArgument when shapes disagree or values are not finite.
  void validate() const;

  /// Rows in the given order.
  FunctionalDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Grids for every predictor plus the outcome.
struct GridSpec {
  std::vector<Grid> predictor_grids;
  std::optional<Grid> outcome_grid;
};

/// Reads {"predictors": <grid> | [<grid>, ...], "outcome": <grid>} where
/// <grid> is {"points": [...]} or {"lo": a, "hi": b, "count": m}. A single
/// predictor grid is applied to all `num_predictors`.
GridSpec load_grid_spec(const std::filesystem::path& path, std::size_t num_predictors);
Grid grid_from_json_text(const std::string& json_text);

FunctionalDataset load_csv(const std::vector<std::filesystem::path>& predictor_paths,
                           const std::filesystem::path& outcome_path, const GridSpec& grids);

/// Writes x<j>.csv files, y.csv and grids.json into a directory.
void save_dataset(const FunctionalDataset& ds, const std::filesystem::path& dir);
std::string grid_spec_json(const FunctionalDataset& ds);

/// Per-predictor pointwise mean curve and one pooled scale.
struct Standardizer {
  std::vector<Vector> means;
  std::vector<double> scales;
};

Standardizer fit_standardizer(const FunctionalDataset& ds, const std::vector<std::size_t>& train_rows);
FunctionalDataset apply_standardizer(const Standardizer& std, const FunctionalDataset& ds);
FunctionalDataset invert_standardizer(const Standardizer& std, const FunctionalDataset& ds);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then the first round(n * test_fraction) rows (at least one,
/// at most n-1) go to the test side. Both sides keep ascending row order.
SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

std::pair<FunctionalDataset, FunctionalDataset> split(const FunctionalDataset& ds, double test_fraction,
                                                      std::uint64_t seed);

}  // namespace ssfr
