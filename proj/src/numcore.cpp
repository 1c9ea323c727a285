// SPDX-License-Identifier: Apache-2.0
#include "numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "errors.hpp"

namespace seqembed {

namespace {

constexpr int kMaxSweeps = 64;

// Orthogonalizes the columns of b in place by cyclic Jacobi rotations,
// accumulating the rotations in v (which must start as the identity).
void jacobi_orthogonalize(Matrix& b, Matrix& v) {
  const Index n = b.cols();
  // Relative off-diagonal threshold. Dot products carry rounding noise of
  // order eps*sqrt(rows), so demanding much less than ~1e-14 never settles.
  const double tol = 1e-13;
  // Columns this far below the matrix scale are rounding residue of a rank
  // deficiency. They are nearly parallel to noise, so the relative test
  // above can never pass for them; flush them to exact zero instead. The
  // Frobenius norm is rotation-invariant, so the cutoff is computed once.
  const double flush = 1e-14 * b.norm();
  const double flush_sq = flush * flush;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Index i = 0; i + 1 < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double alpha = b.col(i).squaredNorm();
        const double beta = b.col(j).squaredNorm();
        if (alpha <= flush_sq) b.col(i).setZero();
        if (beta <= flush_sq) b.col(j).setZero();
        if (alpha <= flush_sq || beta <= flush_sq) continue;
        const double gamma = b.col(i).dot(b.col(j));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index k = 0; k < b.rows(); ++k) {
          const double bi = b(k, i);
          const double bj = b(k, j);
          b(k, i) = c * bi - s * bj;
          b(k, j) = s * bi + c * bj;
        }
        for (Index k = 0; k < v.rows(); ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = c * vi - s * vj;
          v(k, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericalFailure("svd: Jacobi sweeps did not converge", kMaxSweeps);
}

// Fills zero columns of u (those with sigma zero) with unit vectors
// orthogonal to all other columns. For each gap the canonical basis vector
// with the largest residual after projection is taken (smallest index on
// ties), so the completion is deterministic. A second projection pass
// scrubs the components reintroduced by rounding.
void complete_orthonormal(Matrix& u, const std::vector<Index>& zero_cols) {
  if (zero_cols.empty()) return;
  const Index m = u.rows();
  auto project_out = [&u](Vector& w) {
    for (Index j = 0; j < u.cols(); ++j) {
      const double dot = u.col(j).dot(w);
      w -= dot * u.col(j);
    }
  };
  for (Index col : zero_cols) {
    double best_norm = 0.0;
    Vector best;
    for (Index k = 0; k < m; ++k) {
      Vector w = Vector::Zero(m);
      w(k) = 1.0;
      project_out(w);
      const double norm = w.norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(w);
      }
    }
    project_out(best);
    u.col(col) = best / best.norm();
  }
}

// Worker for b with rows >= cols: b = U * diag(sigma) * V^T.
SVDResult svd_tall(const Matrix& input) {
  Matrix b = input;
  const Index n = b.cols();
  Matrix v = Matrix::Identity(n, n);
  jacobi_orthogonalize(b, v);

  Vector norms(n);
  for (Index j = 0; j < n; ++j) norms(j) = b.col(j).norm();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index c) { return norms(a) > norms(c); });

  SVDResult out;
  out.U = Matrix::Zero(b.rows(), n);
  out.V = Matrix::Zero(n, n);
  out.sigma = Vector::Zero(n);
  std::vector<Index> zero_cols;
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    const double s = norms(src);
    out.sigma(j) = s;
    out.V.col(j) = v.col(src);
    if (s > 0.0) {
      out.U.col(j) = b.col(src) / s;
    } else {
      zero_cols.push_back(j);
    }
  }
  complete_orthonormal(out.U, zero_cols);
  return out;
}

void fix_signs(SVDResult& r) {
  for (Index j = 0; j < r.V.cols(); ++j) {
    Index arg = 0;
    double best = 0.0;
    for (Index i = 0; i < r.V.rows(); ++i) {
      const double mag = std::abs(r.V(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (r.V(arg, j) < 0.0) {
      r.V.col(j) = -r.V.col(j);
      r.U.col(j) = -r.U.col(j);
    }
  }
}

}  // namespace

CenterResult center_rows(const Matrix& a) {
  if (!a.allFinite()) throw InvalidInput("center_rows: non-finite entry");
  CenterResult out;
  out.mean = a.colwise().mean();
  out.centered = a.rowwise() - out.mean.transpose();
  return out;
}

SVDResult svd(const Matrix& a) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidInput("svd: empty matrix");
  if (!a.allFinite()) throw InvalidInput("svd: non-finite entry");

  SVDResult out;
  if (a.rows() >= a.cols()) {
    out = svd_tall(a);
  } else {
    // A = (A^T)^T: decompose the transpose and swap the factor roles.
    SVDResult t = svd_tall(a.transpose());
    out.U = t.V;
    out.sigma = std::move(t.sigma);
    out.V = t.U;
  }
  fix_signs(out);
  return out;
}

}  // namespace seqembed
