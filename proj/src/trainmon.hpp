// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "datagen.hpp"
#include "embedding.hpp"
#include "matrix.hpp"
#include "seqmodel.hpp"

namespace seqembed {

struct TrainConfig {
  SeqModelConfig model;
  Index iterations = 0;
  // Sequences sampled per iteration; 0 means every training sequence, which
  // puts all types in every mini-batch for one-sequence-per-type corpora.
  Index batch_size = 0;
  // Ascending, each <= iterations; 0 snapshots the untrained model.
  std::vector<Index> snapshot_iters;
  double validation_fraction = 0.0;
  std::vector<double> sve_levels{0.90, 0.99};
  // Projection widths for snapshot clustering; 0 means full rank.
  std::vector<Index> cluster_dims{3, 0};
};

struct ModeCountEntry {
  TrajectoryKind kind = TrajectoryKind::combined;
  double sve_level = 0.0;
  std::int64_t type = 0;
  Index count = 0;
};

struct AriEntry {
  TrajectoryKind kind = TrajectoryKind::decoder;
  Index dim = 0;  // as requested; 0 means full rank
  double value = 0.0;
};

// Everything needed to re-render one training instant: the global basis, the
// per-type projected trajectories, spectrum bookkeeping and cluster scores.
struct EmbeddingSnapshot {
  Index iteration = 0;
  PODBasis basis;
  std::vector<Trajectory> trajectories;  // encoder then decoder, per type
  std::vector<ModeCountEntry> mode_counts;
  std::vector<AriEntry> aris;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  // |sigma_i - sigma_i(previous snapshot)| on the global spectrum, zero
  // padded to the longer spectrum; empty on a run's first snapshot.
  Vector sigma_deltas;
};

struct TrainHistory {
  std::vector<double> train_losses;  // one per iteration, pre-step loss
  std::vector<double> val_losses;    // post-step; empty without validation
  std::vector<EmbeddingSnapshot> snapshots;
  SeqModelParams params;  // final state
  std::vector<Index> train_indices;
  std::vector<Index> val_indices;
};

struct ModeCountSeries {
  TrajectoryKind kind = TrajectoryKind::combined;
  double sve_level = 0.0;
  std::int64_t type = 0;
  std::vector<Index> iterations;
  std::vector<Index> counts;
};

struct OptimalIteration {
  Index iter_ari_peak = 0;
  Index iter_val_min = 0;
  Index gap = 0;  // |slot difference| in snapshot list positions
};

// Mini-batch ADAM training with embedding snapshots. Each iteration samples
// one window per selected sequence, averages the gradients and takes one
// step. Validation, when requested, holds out seeded sequence indices; an
// explicit validation batch (e.g. phase-shifted regenerations of the same
// patterns) overrides the split. Non-finite losses or gradients raise a
// training failure carrying the last good iteration.
TrainHistory train(const TrainConfig& config, const SequenceBatch& batch,
                   const std::optional<SequenceBatch>& validation = std::nullopt);

// Embeds one canonical window per type (offset 0, first sequence of each
// label) under the current weights: global POD basis, full-rank encoder and
// decoder trajectories, per-type mode counts at each energy level, and the
// cosine single-linkage ARI of encoder and decoder rows at each clustering
// width. train_loss holds the mean loss over the canonical windows; val_loss
// and sigma_deltas are filled by train().
EmbeddingSnapshot snapshot(const SeqModelParams& params, const SequenceBatch& batch,
                           const std::vector<double>& sve_levels,
                           const std::vector<Index>& cluster_dims);

double snapshot_ari(const EmbeddingSnapshot& snap, TrajectoryKind kind, Index dim);
Index snapshot_mode_count(const EmbeddingSnapshot& snap, TrajectoryKind kind,
                          double sve_level, std::int64_t type);

// Tabulates mode counts across snapshots, ordered by (kind, level, type).
std::vector<ModeCountSeries> mode_count_curve(const TrainHistory& history);

// Pearson correlation between snapshot train losses and snapshot ARIs for
// the given kind and width. A constant series has no defined correlation.
double loss_ari_correlation(const TrainHistory& history,
                            TrajectoryKind kind = TrajectoryKind::decoder,
                            Index dim = 0);

// Compares where the decoder ARI peaks with where the smoothed validation
// loss bottoms out (centered moving average over 3 snapshots); ties resolve
// toward the earlier iteration.
OptimalIteration detect_optimal_iteration(const TrainHistory& history);

// Plot-data export: history.json manifest, losses.csv, mode_counts.csv and
// one trajectory CSV per snapshot under <dir>/snapshots.
void write_history(const std::string& dir, const TrainHistory& history);

}  // namespace seqembed
