#include "ssfr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "ssfr/error.hpp"
#include "ssfr/io.hpp"
#include "ssfr/rng.hpp"

namespace ssfr {

using nlohmann::json;

void FunctionalDataset::validate() const {
  if (predictors.size() != predictor_grids.size())
    throw InvalidArgument("dataset: predictor/grid count mismatch");
  if (!names.empty() && names.size() != predictors.size())
    throw InvalidArgument("dataset: name count mismatch");
  if (outcome.cols() != static_cast<Index>(outcome_grid.size()))
    throw InvalidArgument("dataset: outcome columns do not match outcome grid");
  if (!outcome.allFinite()) throw InvalidArgument("dataset: non-finite outcome value");
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    if (predictors[j].rows() != outcome.rows())
      throw InvalidArgument("dataset: predictor " + std::to_string(j) + " row count differs from outcome");
    if (predictors[j].cols() != static_cast<Index>(predictor_grids[j].size()))
      throw InvalidArgument("dataset: predictor " + std::to_string(j) + " columns do not match its grid");
    if (!predictors[j].allFinite())
      throw InvalidArgument("dataset: non-finite value in predictor " + std::to_string(j));
  }
}

namespace {

RowMatrix take_rows(const RowMatrix& m, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(m.rows())) throw InvalidArgument("subset: row index out of range");
    out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  }
  return out;
}

Grid grid_from_json(const json& g) {
  if (!g.is_object()) throw InvalidArgument("grid spec: expected an object");
  if (g.contains("points")) {
    for (auto it = g.begin(); it != g.end(); ++it)
      if (it.key() != "points") throw InvalidArgument("grid spec: unknown key '" + it.key() + "'");
    return Grid(g.at("points").get<std::vector<double>>());
  }
  for (auto it = g.begin(); it != g.end(); ++it)
    if (it.key() != "lo" && it.key() != "hi" && it.key() != "count")
      throw InvalidArgument("grid spec: unknown key '" + it.key() + "'");
  if (!g.contains("lo") || !g.contains("hi") || !g.contains("count"))
    throw InvalidArgument("grid spec: need either points or lo/hi/count");
  return make_uniform_grid(g.at("lo").get<double>(), g.at("hi").get<double>(), g.at("count").get<int>());
}

json grid_to_json(const Grid& g) {
  json pts = json::array();
  for (double p : g.points()) pts.push_back(p);
  return json{{"points", pts}};
}

}  // namespace

FunctionalDataset FunctionalDataset::subset(const std::vector<std::size_t>& rows) const {
  FunctionalDataset out{{}, predictor_grids, take_rows(outcome, rows), outcome_grid, names};
  out.predictors.reserve(predictors.size());
  for (const auto& p : predictors) out.predictors.push_back(take_rows(p, rows));
  return out;
}

Grid grid_from_json_text(const std::string& json_text) {
  try {
    return grid_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("grid spec: ") + e.what());
  }
}

GridSpec load_grid_spec(const std::filesystem::path& path, std::size_t num_predictors) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw InvalidArgument("grid spec " + path.string() + ": " + e.what());
  }
  GridSpec spec;
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (it.key() != "predictors" && it.key() != "outcome")
        throw InvalidArgument("grid spec: unknown key '" + it.key() + "'");
    if (!doc.contains("outcome")) throw InvalidArgument("grid spec " + path.string() + ": missing outcome grid");
    spec.outcome_grid = grid_from_json(doc.at("outcome"));
    if (num_predictors > 0) {
      if (!doc.contains("predictors"))
        throw InvalidArgument("grid spec " + path.string() + ": missing predictor grids");
      const json& p = doc.at("predictors");
      if (p.is_array()) {
        if (p.size() != num_predictors)
          throw InvalidArgument("grid spec: " + std::to_string(p.size()) + " predictor grids for " +
                                std::to_string(num_predictors) + " predictors");
        for (const auto& g : p) spec.predictor_grids.push_back(grid_from_json(g));
      } else {
        const Grid g = grid_from_json(p);
        spec.predictor_grids.assign(num_predictors, g);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("grid spec " + path.string() + ": " + e.what());
  }
  return spec;
}

FunctionalDataset load_csv(const std::vector<std::filesystem::path>& predictor_paths,
                           const std::filesystem::path& outcome_path, const GridSpec& grids) {
  if (!grids.outcome_grid) throw InvalidArgument("load_csv: missing outcome grid");
  if (grids.predictor_grids.size() != predictor_paths.size())
    throw InvalidArgument("load_csv: missing grid for some predictor");
  auto outcome = io::read_csv(outcome_path);
  const Index n = outcome.values.rows();
  if (outcome.values.cols() != static_cast<Index>(grids.outcome_grid->size()))
    throw FormatError(outcome_path.string() + ": " + std::to_string(outcome.values.cols()) +
                      " columns but outcome grid has " + std::to_string(grids.outcome_grid->size()) + " points");
  FunctionalDataset ds{{}, grids.predictor_grids, std::move(outcome.values), *grids.outcome_grid, {}};
  for (std::size_t j = 0; j < predictor_paths.size(); ++j) {
    auto t = io::read_csv(predictor_paths[j]);
    if (t.values.rows() != n)
      throw FormatError(predictor_paths[j].string() + ": " + std::to_string(t.values.rows()) +
                        " rows but outcome has " + std::to_string(n));
    if (t.values.cols() != static_cast<Index>(grids.predictor_grids[j].size()))
      throw FormatError(predictor_paths[j].string() + ": " + std::to_string(t.values.cols()) +
                        " columns but its grid has " + std::to_string(grids.predictor_grids[j].size()) +
                        " points");
    ds.predictors.push_back(std::move(t.values));
    ds.names.push_back(predictor_paths[j].stem().string());
  }
  ds.validate();
  return ds;
}

std::string grid_spec_json(const FunctionalDataset& ds) {
  json preds = json::array();
  for (const auto& g : ds.predictor_grids) preds.push_back(grid_to_json(g));
  json doc{{"predictors", preds}, {"outcome", grid_to_json(ds.outcome_grid)}};
  return doc.dump(2) + "\n";
}

void save_dataset(const FunctionalDataset& ds, const std::filesystem::path& dir) {
  for (std::size_t j = 0; j < ds.predictors.size(); ++j)
    io::atomic_write(dir / ("x" + std::to_string(j + 1) + ".csv"), io::to_csv(ds.predictors[j]));
  io::atomic_write(dir / "y.csv", io::to_csv(ds.outcome));
  io::atomic_write(dir / "grids.json", grid_spec_json(ds));
}

Standardizer fit_standardizer(const FunctionalDataset& ds, const std::vector<std::size_t>& train_rows) {
  if (train_rows.empty()) throw InvalidArgument("fit_standardizer: empty training rows");
  Standardizer s;
  const double count = static_cast<double>(train_rows.size());
  for (std::size_t j = 0; j < ds.predictors.size(); ++j) {
    const RowMatrix& x = ds.predictors[j];
    Vector mean = Vector::Zero(x.cols());
    for (auto i : train_rows) mean += x.row(static_cast<Index>(i)).transpose();
    mean /= count;
    double ss = 0.0;
    for (auto i : train_rows) ss += (x.row(static_cast<Index>(i)).transpose() - mean).squaredNorm();
    const double scale = std::sqrt(ss / (count * static_cast<double>(x.cols())));
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw DegenerateData("fit_standardizer: predictor " + std::to_string(j) + " has zero scale on training rows");
    s.means.push_back(std::move(mean));
    s.scales.push_back(scale);
  }
  return s;
}

namespace {

void check_standardizer(const Standardizer& s, const FunctionalDataset& ds) {
  if (s.means.size() != ds.predictors.size() || s.scales.size() != ds.predictors.size())
    throw InvalidArgument("standardizer: predictor count mismatch");
  for (std::size_t j = 0; j < ds.predictors.size(); ++j)
    if (s.means[j].size() != ds.predictors[j].cols())
      throw InvalidArgument("standardizer: grid length mismatch for predictor " + std::to_string(j));
}

}  // namespace

FunctionalDataset apply_standardizer(const Standardizer& s, const FunctionalDataset& ds) {
  check_standardizer(s, ds);
  FunctionalDataset out = ds;
  for (std::size_t j = 0; j < ds.predictors.size(); ++j) {
    out.predictors[j].rowwise() -= s.means[j].transpose();
    out.predictors[j] /= s.scales[j];
  }
  return out;
}

FunctionalDataset invert_standardizer(const Standardizer& s, const FunctionalDataset& ds) {
  check_standardizer(s, ds);
  FunctionalDataset out = ds;
  for (std::size_t j = 0; j < ds.predictors.size(); ++j) {
    out.predictors[j] *= s.scales[j];
    out.predictors[j].rowwise() += s.means[j].transpose();
  }
  return out;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("split: test fraction must lie in (0, 1)");
  if (n < 2) throw InvalidArgument("split: need at least 2 rows");
  Rng rng(seed);
  auto perm = permutation(n, rng);
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  SplitIndices s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::pair<FunctionalDataset, FunctionalDataset> split(const FunctionalDataset& ds, double test_fraction,
                                                      std::uint64_t seed) {
  auto idx = split_indices(static_cast<std::size_t>(ds.n()), test_fraction, seed);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

}  // namespace ssfr
