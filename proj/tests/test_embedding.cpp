// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "datagen.hpp"
#include "embedding.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "seqmodel.hpp"

using namespace seqembed;
namespace fs = std::filesystem;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

StateBundle circle_bundle(std::uint64_t seed, SeqModelParams* out_params = nullptr,
                          Matrix* out_x = nullptr) {
  SeqModelConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = 16;
  cfg.encoder_steps = 50;
  cfg.decoder_steps = 50;
  cfg.seed = seed;
  SeqModelParams p = init_params(cfg);
  ConicSpec spec;
  spec.steps_per_period = 50;
  const Matrix x = gen_conic(spec);
  StateBundle b = forward(x, p, 50);
  if (out_params) *out_params = std::move(p);
  if (out_x) *out_x = x;
  return b;
}

}  // namespace

TEST_CASE("assemble_state_matrix stacks encoder over decoder") {
  const StateBundle b = circle_bundle(5);
  const Matrix s = assemble_state_matrix(b);
  REQUIRE(s.rows() == 100);
  REQUIRE(s.cols() == 16);
  CHECK(bit_equal(Matrix(s.topRows(50)), b.E));
  CHECK(bit_equal(Matrix(s.bottomRows(50)), b.D));
  CHECK((s.row(49).array() == b.E.row(49).array()).all());
  CHECK((s.row(50).array() == b.D.row(0).array()).all());

  StateBundle zero;
  zero.E = Matrix::Zero(3, 4);
  zero.D = Matrix::Zero(2, 4);
  CHECK(assemble_state_matrix(zero).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble_global stacks blocks in list order") {
  Rng rng(7);
  const Matrix a = random_matrix(100, 16, rng, -1.0, 1.0);
  const Matrix b = random_matrix(100, 16, rng, -1.0, 1.0);
  const Matrix g = assemble_global({a, b});
  REQUIRE(g.rows() == 200);
  CHECK(bit_equal(Matrix(g.topRows(100)), a));
  CHECK(bit_equal(Matrix(g.bottomRows(100)), b));

  CHECK(bit_equal(assemble_global({a}), a));

  std::vector<Matrix> wide(15, Matrix::Zero(100, 1024));
  const Matrix big = assemble_global(wide);
  CHECK(big.rows() == 1500);
  CHECK(big.cols() == 1024);

  CHECK_THROWS_AS(assemble_global({a, Matrix::Zero(10, 8)}), InvalidInput);
  CHECK_THROWS_AS(assemble_global({}), InvalidInput);
}

TEST_CASE("pod of identical rows has zero spectrum") {
  Matrix m(6, 3);
  for (Index r = 0; r < 6; ++r) m.row(r) << 2.0, -1.0, 0.5;
  const PODBasis basis = pod(m);
  CHECK(basis.sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(basis.mean(0) == 2.0);
  CHECK(basis.mean(1) == -1.0);
  CHECK(basis.mean(2) == 0.5);
}

TEST_CASE("pod of two stacked constant trajectories is rank one") {
  Matrix m(10, 4);
  for (Index r = 0; r < 5; ++r) m.row(r) << 1.0, 2.0, 3.0, 4.0;
  for (Index r = 5; r < 10; ++r) m.row(r) << -1.0, 0.0, 1.0, 2.0;
  const PODBasis basis = pod(m);
  Index nonzero = 0;
  for (Index i = 0; i < basis.sigma.size(); ++i)
    if (basis.sigma(i) > 1e-10) ++nonzero;
  CHECK(nonzero == 1);
}

TEST_CASE("pod of a centered matrix reports a zero mean") {
  Rng rng(9);
  Matrix m = random_matrix(12, 5, rng, -2.0, 2.0);
  m = m.rowwise() - m.colwise().mean();
  const PODBasis basis = pod(m);
  CHECK(basis.mean.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pod basis columns are orthonormal") {
  Rng rng(10);
  const Matrix m = random_matrix(30, 8, rng, -3.0, 3.0);
  const PODBasis basis = pod(m);
  const Matrix gram = basis.modes.transpose() * basis.modes;
  CHECK((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8);
  for (Index i = 0; i + 1 < basis.sigma.size(); ++i)
    CHECK(basis.sigma(i) >= basis.sigma(i + 1));
}

TEST_CASE("mode_count follows the energy-retention rule") {
  Vector two(2);
  two << 3.0, 1.0;
  CHECK(mode_count(two, 0.9) == 1);  // 9 / 10
  Vector four = Vector::Ones(4);
  CHECK(mode_count(four, 0.5) == 2);
  Vector mixed(4);
  mixed << 2.0, 1.0, 0.0, 0.0;
  CHECK(mode_count(mixed, 1.0) == 2);
  CHECK(mode_count(two, 1.0) == 2);
}

TEST_CASE("mode_count is monotone in the retention fraction") {
  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 1 + rng.uniform_int(12);
    Vector sigma(n);
    double prev = rng.uniform(1.0, 5.0);
    for (Index i = 0; i < n; ++i) {
      sigma(i) = prev;
      prev *= rng.uniform(0.2, 1.0);
    }
    Index last = 1;
    for (double p = 0.05; p <= 1.0; p += 0.05) {
      const Index k = mode_count(sigma, std::min(p, 1.0));
      CHECK(k >= last);
      last = k;
    }
    CHECK(mode_count(sigma, 0.90) <= mode_count(sigma, 0.99));
  }
}

TEST_CASE("mode_count rejects degenerate inputs") {
  CHECK_THROWS_AS(mode_count(Vector::Zero(3), 0.9), InvalidInput);
  Vector rising(2);
  rising << 1.0, 2.0;
  CHECK_THROWS_AS(mode_count(rising, 0.9), InvalidInput);
  Vector ok = Vector::Ones(2);
  CHECK_THROWS_AS(mode_count(ok, 0.0), InvalidInput);
  CHECK_THROWS_AS(mode_count(ok, 1.5), InvalidInput);
}

TEST_CASE("full-rank projection is an isometry on the centered rows") {
  Rng rng(13);
  const Matrix a = random_matrix(20, 6, rng, -2.0, 2.0);
  const PODBasis basis = pod(a);
  const Index r = basis.modes.cols();
  const Trajectory traj = project(a, basis, r);
  const Matrix centered = a.rowwise() - basis.mean.transpose();
  CHECK(std::abs(traj.points.squaredNorm() - centered.squaredNorm()) /
            centered.squaredNorm() <
        1e-8);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = i + 1; j < a.rows(); ++j) {
      const double dp = (traj.points.row(i) - traj.points.row(j)).norm();
      const double dc = (centered.row(i) - centered.row(j)).norm();
      CHECK(std::abs(dp - dc) < 1e-8);
    }
}

TEST_CASE("projecting the mean row lands at the origin") {
  Rng rng(14);
  const Matrix a = random_matrix(15, 4, rng, -2.0, 2.0);
  const PODBasis basis = pod(a);
  Matrix row(1, 4);
  row = basis.mean.transpose();
  const Trajectory traj = project(row, basis, basis.modes.cols());
  CHECK(traj.points.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project validates the mode count and width") {
  Rng rng(15);
  const Matrix a = random_matrix(10, 4, rng, -1.0, 1.0);
  const PODBasis basis = pod(a);
  CHECK_THROWS_AS(project(a, basis, basis.modes.cols() + 1), InvalidInput);
  CHECK_THROWS_AS(project(a, basis, 0), InvalidInput);
  CHECK_THROWS_AS(project(Matrix::Zero(5, 7), basis, 1), InvalidInput);
}

TEST_CASE("projecting the stack equals stacking the projections") {
  Rng rng(16);
  const Matrix s1 = random_matrix(40, 6, rng, -1.0, 1.0);
  const Matrix s2 = random_matrix(30, 6, rng, -1.0, 1.0);
  const Matrix global = assemble_global({s1, s2});
  const PODBasis basis = pod(global);
  const Index n = 3;
  const Trajectory whole = project(global, basis, n);
  const Trajectory p1 = project(s1, basis, n);
  const Trajectory p2 = project(s2, basis, n);
  const Matrix stacked = assemble_global({p1.points, p2.points});
  CHECK((whole.points - stacked).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("all encoder trajectories start at the projected zero state") {
  SeqModelParams params;
  const StateBundle b1 = circle_bundle(21, &params);
  ConicSpec espec;
  espec.radius_a = 2.0;
  espec.steps_per_period = 50;
  const Matrix x2 = gen_conic(espec);
  const StateBundle b2 = forward(x2, params, 50);

  const Matrix global =
      assemble_global({assemble_state_matrix(b1), assemble_state_matrix(b2)});
  const PODBasis basis = pod(global);
  const Index n = 3;
  const Trajectory enc1 = project(prepend_zero_row(b1.E), basis, n);
  const Trajectory enc2 = project(prepend_zero_row(b2.E), basis, n);
  const RowVec expected = -basis.mean.transpose() * basis.modes.leftCols(n);
  CHECK((enc1.points.row(0) - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((enc1.points.row(0) - enc2.points.row(0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("endpoints return the first and last points") {
  Trajectory traj;
  traj.points = Matrix::Zero(1, 3);
  traj.points << 1.0, 2.0, 3.0;
  const auto [start, end] = endpoints(traj);
  CHECK((start.array() == end.array()).all());

  Trajectory empty;
  empty.points = Matrix(0, 3);
  CHECK_THROWS_AS(endpoints(empty), InvalidInput);
}

TEST_CASE("decoder start is one step past the encoder end") {
  SeqModelParams params;
  Matrix x;
  const StateBundle b = circle_bundle(23, &params, &x);
  // Recompute the first decoder state from the cached pieces.
  const Matrix recomputed =
      gru_step(x.row(49), b.E.row(49), params.decoder_gates(), nullptr);
  CHECK((recomputed - b.D.row(0)).cwiseAbs().maxCoeff() < 1e-14);

  const PODBasis basis = pod(assemble_state_matrix(b));
  const Trajectory enc = project(b.E, basis, 3);
  const Trajectory dec = project(b.D, basis, 3);
  const auto [estart, eend] = endpoints(enc);
  const auto [dstart, dend] = endpoints(dec);
  CHECK((eend - dstart).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("projection of circle states yields a three-column trajectory") {
  const StateBundle b = circle_bundle(29);
  const PODBasis basis = pod(assemble_state_matrix(b));
  const Trajectory traj = project(assemble_state_matrix(b), basis, 3);
  CHECK(traj.points.rows() == 100);
  CHECK(traj.points.cols() == 3);
}

TEST_CASE("trajectory csv round-trips points and metadata") {
  Rng rng(31);
  Trajectory a;
  a.points = random_matrix(5, 3, rng, -2.0, 2.0);
  a.kind = TrajectoryKind::encoder;
  a.type_label = 1;
  a.iteration = 500;
  Trajectory b;
  b.points = random_matrix(7, 3, rng, -2.0, 2.0);
  b.kind = TrajectoryKind::decoder;

  const auto path = (fs::temp_directory_path() / "traj_roundtrip.csv").string();
  write_trajectory_csv(path, {a, b});
  const auto loaded = read_trajectory_csv(path);
  REQUIRE(loaded.size() == 2);
  CHECK(bit_equal(loaded[0].points, a.points));
  CHECK(loaded[0].kind == TrajectoryKind::encoder);
  CHECK(loaded[0].type_label == std::optional<std::int64_t>(1));
  CHECK(loaded[0].iteration == std::optional<std::int64_t>(500));
  CHECK(bit_equal(loaded[1].points, b.points));
  CHECK(loaded[1].kind == TrajectoryKind::decoder);
  CHECK_FALSE(loaded[1].type_label.has_value());
  CHECK_FALSE(loaded[1].iteration.has_value());
  fs::remove(path);
}

TEST_CASE("trajectory csv rejects malformed documents") {
  const auto path = (fs::temp_directory_path() / "traj_bad.csv").string();
  {
    std::ofstream out(path);
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(read_trajectory_csv(path), IngestionError);
  {
    std::ofstream out(path);
    out << "iter,kind,type_label,t,pc1\n5,encoder,0,1,0.5\n";
  }
  CHECK_THROWS_AS(read_trajectory_csv(path), IngestionError);  // t starts at 1
  fs::remove(path);

  Trajectory a;
  a.points = Matrix::Zero(2, 3);
  Trajectory b;
  b.points = Matrix::Zero(2, 4);
  CHECK_THROWS_AS(write_trajectory_csv(path, {a, b}), InvalidInput);
  CHECK_THROWS_AS(write_trajectory_csv(path, {}), InvalidInput);
}
