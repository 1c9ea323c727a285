// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "seqmodel.hpp"

namespace seqembed {

struct PODBasis {
  Vector mean;   // column means of the source matrix
  Vector sigma;  // descending, non-negative
  Matrix modes;  // N x r, orthonormal columns
  Index source_rows = 0;
  Index source_cols = 0;
};

enum class TrajectoryKind { encoder, decoder, combined };

struct Trajectory {
  Matrix points;  // T x n
  TrajectoryKind kind = TrajectoryKind::combined;
  std::optional<std::int64_t> type_label;
  std::optional<std::int64_t> iteration;
};

// S = [E; D], bit-exact stacking.
Matrix assemble_state_matrix(const StateBundle& bundle);

// Vertical stack of per-sequence state matrices in list order.
Matrix assemble_global(const std::vector<Matrix>& s_list);

// Centers the input with its column means and decomposes the result.
PODBasis pod(const Matrix& global);

// Smallest k whose cumulative squared singular values reach fraction p of
// the total energy.
Index mode_count(const Vector& sigma, double p);

// (A - mean) * modes[:, 0..n). The basis mean is used for every input so
// all projections share one frame.
Trajectory project(const Matrix& a, const PODBasis& basis, Index n);

std::pair<RowVec, RowVec> endpoints(const Trajectory& traj);

// Zero row on top: encoder trajectories include the initial state so they
// all depart from one projected point.
Matrix prepend_zero_row(const Matrix& m);

const char* trajectory_kind_name(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_name(const std::string& name);

// Plot-data contract: header iter,kind,type_label,t,pc1..pcn; one row per
// trajectory point; empty cells for absent metadata. All trajectories in
// one file share n.
void write_trajectory_csv(const std::string& path,
                          const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectory_csv(const std::string& path);

}  // namespace seqembed
