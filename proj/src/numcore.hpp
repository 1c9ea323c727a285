// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "matrix.hpp"

namespace seqembed {

// Thin SVD A = U * diag(sigma) * V^T with r = min(rows, cols).
// Columns of U and V are orthonormal, sigma is sorted descending, and the
// sign of each mode is fixed so the largest-magnitude entry of every V
// column is positive. That keeps decompositions of nearby matrices (for
// example across training iterations) in a comparable orientation.
struct SVDResult {
  Matrix U;      // rows x r
  Vector sigma;  // r, descending, non-negative
  Matrix V;      // cols x r
};

struct CenterResult {
  Matrix centered;
  Vector mean;  // per-column mean, length cols
};

// Subtracts the column mean from every row.
CenterResult center_rows(const Matrix& a);

// One-sided Jacobi SVD. Robust at the sizes used here (hidden-state
// matrices, a few hundred rows by at most a few hundred columns).
SVDResult svd(const Matrix& a);

}  // namespace seqembed
