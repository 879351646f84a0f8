#pragma once

#include <Eigen/Dense>

namespace bwesid {

// Row-major so that each row (frame, feature vector) is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace bwesid
