#pragma once

#include <Eigen/Dense>

namespace rhpt {

// Data matrices are row-major with one sample per row, matching the CSV
// layout and the per-row access pattern of embedding and matching.
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace rhpt
