// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace seqembed {

// Dense double-precision matrix, row-major so the raw buffer matches the
// on-disk and C API layouts.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

using Index = Eigen::Index;

}  // namespace seqembed
