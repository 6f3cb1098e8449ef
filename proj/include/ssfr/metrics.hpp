#pragma once

#include <span>
#include <string>
#include <vector>

#include "ssfr/types.hpp"

namespace ssfr {

/// n^-1 sum_i (int y_i^2 - int (y_i - mu_i)^2) / int y_i^2 with quadrature
/// weights xi. A curve with zero energy raises DegenerateData naming the row.
double functional_r2(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi);

/// Same quantity under the name used for model comparisons.
double mse_relative_diff(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi);

/// Mean over curves of RMSE_i / (max_q y_i - min_q y_i).
double rel_rmse(const RowMatrix& y, const RowMatrix& mu);

/// Root mean squared error over all cells.
double rmse(const RowMatrix& y, const RowMatrix& mu);

/// Correlation of the flattened arrays.
double pearson(const RowMatrix& y, const RowMatrix& mu);

/// Relative L2 distance of two surfaces on a tensor mesh with trapezoid weights
/// (rows follow s_weights, columns t_weights).
double surface_error(const RowMatrix& w_true, const RowMatrix& w_est, std::span<const double> s_weights,
                     std::span<const double> t_weights);

struct EvalReport {
  double functional_r2 = 0.0;
  double rel_rmse = 0.0;
  double rmse = 0.0;
  double pearson = 0.0;  // NaN when either array is constant
  double mse_relative_diff = 0.0;
  std::vector<double> curve_r2;        // per curve, NaN for skipped rows
  std::vector<double> curve_rel_rmse;  // per curve, NaN for skipped rows
  std::vector<double> curve_rmse;
  std::vector<long> skipped_rows;

  std::string to_json() const;
  std::string per_curve_csv() const;
};

/// All metrics at once. With skip_degenerate, curves with zero energy or a
/// flat range are left out of the averages and listed in skipped_rows.
EvalReport evaluate(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi, bool skip_degenerate = false);

}  // namespace ssfr
