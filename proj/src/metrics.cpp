#include "ssfr/metrics.hpp"

#include <cmath>
#include <limits>
#include <json.hpp>

#include "ssfr/error.hpp"
#include "ssfr/io.hpp"

namespace ssfr {

namespace {

void check_shapes(const RowMatrix& y, const RowMatrix& mu) {
  if (y.rows() != mu.rows() || y.cols() != mu.cols()) throw InvalidArgument("metrics: shape mismatch");
  if (y.size() == 0) throw InvalidArgument("metrics: empty input");
}

double curve_energy(const RowMatrix& m, Index i, std::span<const double> xi) {
  double acc = 0.0;
  for (Index q = 0; q < m.cols(); ++q) acc += xi[static_cast<std::size_t>(q)] * m(i, q) * m(i, q);
  return acc;
}

double curve_r2(const RowMatrix& y, const RowMatrix& mu, Index i, std::span<const double> xi) {
  const double energy = curve_energy(y, i, xi);
  if (!(energy > 0.0)) throw DegenerateData("functional_r2: curve " + std::to_string(i) + " has zero energy", i);
  double err = 0.0;
  for (Index q = 0; q < y.cols(); ++q) {
    const double d = y(i, q) - mu(i, q);
    err += xi[static_cast<std::size_t>(q)] * d * d;
  }
  return (energy - err) / energy;
}

double curve_rmse(const RowMatrix& y, const RowMatrix& mu, Index i) {
  return std::sqrt((y.row(i) - mu.row(i)).squaredNorm() / static_cast<double>(y.cols()));
}

double curve_rel_rmse(const RowMatrix& y, const RowMatrix& mu, Index i) {
  const double range = y.row(i).maxCoeff() - y.row(i).minCoeff();
  if (!(range > 0.0)) throw DegenerateData("rel_rmse: curve " + std::to_string(i) + " is flat", i);
  return curve_rmse(y, mu, i) / range;
}

}  // namespace

double functional_r2(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi) {
  check_shapes(y, mu);
  if (static_cast<Index>(xi.size()) != y.cols()) throw InvalidArgument("functional_r2: weight length mismatch");
  double total = 0.0;
  for (Index i = 0; i < y.rows(); ++i) total += curve_r2(y, mu, i, xi);
  return total / static_cast<double>(y.rows());
}

double mse_relative_diff(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi) {
  return functional_r2(y, mu, xi);
}

double rel_rmse(const RowMatrix& y, const RowMatrix& mu) {
  check_shapes(y, mu);
  double total = 0.0;
  for (Index i = 0; i < y.rows(); ++i) total += curve_rel_rmse(y, mu, i);
  return total / static_cast<double>(y.rows());
}

double rmse(const RowMatrix& y, const RowMatrix& mu) {
  check_shapes(y, mu);
  return std::sqrt((y - mu).squaredNorm() / static_cast<double>(y.size()));
}

double pearson(const RowMatrix& y, const RowMatrix& mu) {
  check_shapes(y, mu);
  const double my = y.mean(), mm = mu.mean();
  const auto dy = (y.array() - my);
  const auto dm = (mu.array() - mm);
  const double syy = dy.square().sum(), smm = dm.square().sum();
  if (!(syy > 0.0) || !(smm > 0.0)) throw DegenerateData("pearson: constant array");
  const double r = (dy * dm).sum() / std::sqrt(syy * smm);
  return std::clamp(r, -1.0, 1.0);
}

double surface_error(const RowMatrix& w_true, const RowMatrix& w_est, std::span<const double> s_weights,
                     std::span<const double> t_weights) {
  check_shapes(w_true, w_est);
  if (static_cast<Index>(s_weights.size()) != w_true.rows() || static_cast<Index>(t_weights.size()) != w_true.cols())
    throw InvalidArgument("surface_error: weight lengths do not match the mesh");
  double num = 0.0, den = 0.0;
  for (Index a = 0; a < w_true.rows(); ++a)
    for (Index b = 0; b < w_true.cols(); ++b) {
      const double w = s_weights[static_cast<std::size_t>(a)] * t_weights[static_cast<std::size_t>(b)];
      const double d = w_est(a, b) - w_true(a, b);
      num += w * d * d;
      den += w * w_true(a, b) * w_true(a, b);
    }
  if (!(den > 0.0)) throw DegenerateData("surface_error: true surface is zero");
  return std::sqrt(num / den);
}

EvalReport evaluate(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi, bool skip_degenerate) {
  check_shapes(y, mu);
  if (static_cast<Index>(xi.size()) != y.cols()) throw InvalidArgument("evaluate: weight length mismatch");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EvalReport r;
  double r2_sum = 0.0, rel_sum = 0.0;
  std::size_t used = 0;
  for (Index i = 0; i < y.rows(); ++i) {
    r.curve_rmse.push_back(curve_rmse(y, mu, i));
    try {
      const double c_r2 = curve_r2(y, mu, i, xi);
      const double c_rel = curve_rel_rmse(y, mu, i);
      r.curve_r2.push_back(c_r2);
      r.curve_rel_rmse.push_back(c_rel);
      r2_sum += c_r2;
      rel_sum += c_rel;
      ++used;
    } catch (const DegenerateData&) {
      if (!skip_degenerate) throw;
      r.curve_r2.push_back(nan);
      r.curve_rel_rmse.push_back(nan);
      r.skipped_rows.push_back(static_cast<long>(i));
    }
  }
  if (used == 0) throw DegenerateData("evaluate: every curve is degenerate");
  r.functional_r2 = r2_sum / static_cast<double>(used);
  r.mse_relative_diff = r.functional_r2;
  r.rel_rmse = rel_sum / static_cast<double>(used);
  r.rmse = rmse(y, mu);
  // Undefined for constant predictions; reported as null.
  try {
    r.pearson = pearson(y, mu);
  } catch (const DegenerateData&) {
    r.pearson = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"functional_r2", functional_r2}, {"rel_rmse", rel_rmse},   {"rmse", rmse},
                   {"pearson", pearson},             {"mse_relative_diff", mse_relative_diff},
                   {"n_curves", curve_rmse.size()},  {"skipped_rows", skipped_rows}};
  return j.dump(2) + "\n";
}

std::string EvalReport::per_curve_csv() const {
  std::string out = "row,functional_r2,rel_rmse,rmse\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string("NA") : io::format_double(v); };
  for (std::size_t i = 0; i < curve_rmse.size(); ++i)
    out += std::to_string(i) + "," + cell(curve_r2[i]) + "," + cell(curve_rel_rmse[i]) + "," + cell(curve_rmse[i]) + "\n";
  return out;
}

}  // namespace ssfr
