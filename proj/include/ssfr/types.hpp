#pragma once

#include <Eigen/Dense>

namespace ssfr {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
// Column-major; used for coefficient matrices so that Map over data() is vec().
using Matrix = Eigen::MatrixXd;
// Observation-major storage for n x R predictor and n x Q outcome arrays.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

}  // namespace ssfr
