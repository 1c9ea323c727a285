// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace seqembed {

struct ConicSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius_a = 1.0;
  double radius_b = 1.0;
  Index steps_per_period = 50;  // total rows emitted
  double phase = 0.0;
  double periods = 1.0;
};

struct SequenceBatch {
  std::vector<Matrix> sequences;  // each T_i x M, equal M
  std::optional<std::vector<std::int64_t>> labels;
  std::optional<std::vector<std::string>> feature_names;
};

struct SeqPair {
  Matrix X;
  Matrix Y;
};

struct ConcatResult {
  Matrix frames;
  std::vector<std::int64_t> frame_labels;
};

// Rows center + (a cos th_t, b sin th_t), th_t = phase + 2*pi*periods*t/T.
Matrix gen_conic(const ConicSpec& spec);

// Appends K one-hot columns keyed by each sequence's label.
SequenceBatch one_hot_augment(const SequenceBatch& batch, Index num_classes);

// Continuation mode slices X then Y back to back; repeat mode sets Y = X
// and requires t_d == t_e.
SeqPair make_pair(const Matrix& sequence, Index t_e, Index t_d, Index offset,
                  bool repeat = false);

// K deterministic planar patterns labeled 0..K-1, each exactly T rows.
// Class 0 is the unit circle and class 1 the (2,1) ellipse; later classes
// add rate-varied circles, translated conics and Lissajous figures so both
// spatial and temporal structure separate them. The seed randomizes each
// class's phase.
SequenceBatch gen_multiclass_corpus(Index num_classes, Index rows, std::uint64_t seed);

// One sequence per CSV file, lexicographic filename order. A filename stem
// suffix "_<integer>" is read as the label; labels attach only when every
// file carries one.
SequenceBatch load_csv_dir(const std::string& path);

// Counterpart of load_csv_dir: seq<idx>.csv, or seq<idx>_<label>.csv when
// the batch is labeled.
void save_csv_dir(const SequenceBatch& batch, const std::string& path);

// Row-wise concatenation in the given order with per-frame source labels.
ConcatResult concat_labeled(const SequenceBatch& batch,
                            const std::vector<Index>& order);

}  // namespace seqembed
