// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "numcore.hpp"
#include "rng.hpp"

using namespace seqembed;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

double orthonormality_error(const Matrix& q) {
  Matrix g = q.transpose() * q;
  g -= Matrix::Identity(q.cols(), q.cols());
  return g.cwiseAbs().maxCoeff();
}

double reconstruction_error(const Matrix& a, const SVDResult& r) {
  Matrix rebuilt = r.U * r.sigma.asDiagonal() * r.V.transpose();
  const double denom = a.norm();
  return denom == 0.0 ? (rebuilt - a).norm() : (rebuilt - a).norm() / denom;
}

void check_invariants(const Matrix& a, const SVDResult& r) {
  CHECK(orthonormality_error(r.U) < 1e-8);
  CHECK(orthonormality_error(r.V) < 1e-8);
  for (Index i = 0; i + 1 < r.sigma.size(); ++i) CHECK(r.sigma(i) >= r.sigma(i + 1));
  CHECK(r.sigma.minCoeff() >= 0.0);
  CHECK(reconstruction_error(a, r) < 1e-8);
}

}  // namespace

TEST_CASE("center_rows constant matrix") {
  Matrix a = Matrix::Constant(3, 2, 5.0);
  auto res = center_rows(a);
  CHECK(res.centered.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.mean(0) == 5.0);
  CHECK(res.mean(1) == 5.0);
}

TEST_CASE("center_rows already centered input is returned unchanged") {
  Matrix a(2, 2);
  a << -1.0, -2.0, 1.0, 2.0;
  auto res = center_rows(a);
  CHECK(res.mean(0) == 0.0);
  CHECK(res.mean(1) == 0.0);
  CHECK(res.centered == a);
}

TEST_CASE("center_rows hand-computed column means") {
  Matrix a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  auto res = center_rows(a);
  CHECK(res.mean(0) == 2.0);
  CHECK(res.mean(1) == 3.0);
  Matrix expected(2, 2);
  expected << -1.0, -1.0, 1.0, 1.0;
  CHECK(res.centered == expected);
  // adding the mean back recovers the input bit-exactly on this input
  Matrix rebuilt = res.centered.rowwise() + res.mean.transpose();
  CHECK(rebuilt == a);
}

TEST_CASE("center_rows rejects non-finite entries") {
  Matrix a = Matrix::Zero(2, 2);
  a(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(center_rows(a), InvalidInput);
}

TEST_CASE("center_rows zero mean within 1e-12 and idempotence") {
  Rng rng(20240501);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a = random_matrix(3 + rng.uniform_int(30), 1 + rng.uniform_int(8), rng, -10.0, 10.0);
    auto first = center_rows(a);
    for (Index c = 0; c < a.cols(); ++c) {
      CHECK(std::abs(first.centered.col(c).mean()) < 1e-12);
    }
    auto second = center_rows(first.centered);
    CHECK((second.centered - first.centered).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("center_rows idempotence is exact on dyadic inputs") {
  // Entries are multiples of 1/8 and row counts are powers of two, so the
  // column means and the residuals are exact in binary floating point.
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Index rows = Index{1} << (2 + rng.uniform_int(4));
    const Index cols = 1 + rng.uniform_int(6);
    Matrix a(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) a(r, c) = static_cast<double>(rng.uniform_int(65)) / 8.0;
    auto first = center_rows(a);
    auto second = center_rows(first.centered);
    CHECK(second.centered == first.centered);
    CHECK(second.mean.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("svd of the identity") {
  Matrix a = Matrix::Identity(2, 2);
  auto r = svd(a);
  CHECK(r.sigma.size() == 2);
  CHECK(r.sigma(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.sigma(1) == doctest::Approx(1.0).epsilon(1e-12));
  check_invariants(a, r);
}

TEST_CASE("svd of the zero matrix") {
  Matrix a = Matrix::Zero(3, 3);
  auto r = svd(a);
  CHECK(r.sigma.size() == 3);
  CHECK(r.sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(orthonormality_error(r.U) < 1e-12);
  CHECK(orthonormality_error(r.V) < 1e-12);
}

TEST_CASE("svd multiply-back oracle on a seeded 7x4 matrix") {
  Rng rng(42);
  Matrix a = random_matrix(7, 4, rng);
  auto r = svd(a);
  CHECK(reconstruction_error(a, r) < 1e-10);
  check_invariants(a, r);
}

TEST_CASE("svd rejects non-finite input") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd(a), InvalidInput);
}

TEST_CASE("svd invariants over random shapes, tall wide and rank-deficient") {
  Rng rng(1234);
  for (int rep = 0; rep < 60; ++rep) {
    const Index rows = 1 + rng.uniform_int(20);
    const Index cols = 1 + rng.uniform_int(20);
    Matrix a = random_matrix(rows, cols, rng, -5.0, 5.0);
    if (rep % 4 == 0 && cols >= 2) a.col(cols - 1) = a.col(0);  // force rank deficiency
    auto r = svd(a);
    check_invariants(a, r);

    // total energy equals the squared Frobenius norm
    CHECK(r.sigma.squaredNorm() ==
          doctest::Approx(a.squaredNorm()).epsilon(1e-8));

    // same spectrum for the transpose
    auto rt = svd(Matrix(a.transpose()));
    REQUIRE(rt.sigma.size() == r.sigma.size());
    for (Index i = 0; i < r.sigma.size(); ++i)
      CHECK(std::abs(rt.sigma(i) - r.sigma(i)) < 1e-10 * std::max(1.0, r.sigma(0)));

    // sign convention: the largest-magnitude entry of each V column is positive
    for (Index j = 0; j < r.V.cols(); ++j) {
      Index arg = 0;
      for (Index i = 0; i < r.V.rows(); ++i)
        if (std::abs(r.V(i, j)) > std::abs(r.V(arg, j))) arg = i;
      CHECK(r.V(arg, j) >= 0.0);
    }
  }
}

TEST_CASE("svd is deterministic") {
  Rng rng(99);
  Matrix a = random_matrix(12, 9, rng);
  auto r1 = svd(a);
  auto r2 = svd(a);
  CHECK(r1.U == r2.U);
  CHECK(r1.sigma == r2.sigma);
  CHECK(r1.V == r2.V);
}
