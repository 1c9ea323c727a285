// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "matrix.hpp"
#include "seqmodel.hpp"

namespace seqembed {

enum class FeatureMode { window_mean, all_rows };

struct ScanConfig {
  Index t_e = 1;
  Index t_d = 1;
  Index stride = 1;
  Index k = 2;  // clusters expected by label_frames
  FeatureMode feature_mode = FeatureMode::window_mean;
};

struct WindowFeatures {
  Index start = 0;  // first input frame of the window
  // 1 x N mean decoder state, or t_d x N rows in all_rows mode.
  Matrix features;
};

struct ScanResult {
  Index frames = 0;  // length of the scanned sequence
  std::vector<WindowFeatures> windows;
};

struct SegmentResult {
  std::vector<std::int64_t> frame_labels;
  std::vector<std::int64_t> window_labels;
  std::vector<Index> boundaries;  // first frame of each new label run
  std::optional<double> accuracy;
  // Clusters holding a single window; a populated cluster next to K-1 of
  // these marks a degenerate scan (e.g. all windows identical).
  Index singleton_clusters = 0;
};

struct SegmentationScore {
  double matched_accuracy = 0.0;
  double ari = 0.0;
  // Per true boundary, frame distance to the nearest predicted boundary;
  // the frame count stands in when no boundary was predicted at all.
  std::vector<Index> boundary_errors;
};

// Slides windows over the sequence at 0, stride, 2*stride, ... while
// start + t_e + t_d fits, running the model forward on each and collecting
// decoder-state features per cfg.feature_mode.
ScanResult scan_windows(const Matrix& seq, const SeqModelParams& model,
                        const ScanConfig& cfg);

// Projects window features through the basis (n columns, 0 meaning full),
// clusters them into cfg.k by single-linkage cosine and spreads the labels
// to frames: each frame takes the majority label over the decoder spans
// [start+t_e, start+t_e+t_d) covering it, ties toward the earlier window.
// Frames before the first span take the first window's label; frames after
// the last span take the nearest span's label. A scan whose projected
// features are all rounding-level zero (identical windows) degenerates to
// one populated cluster plus k-1 singletons, mirroring zero-distance
// single-linkage merges.
SegmentResult label_frames(const ScanResult& scan, const ScanConfig& cfg,
                           const PODBasis& basis, Index n);

SegmentationScore evaluate_segmentation(const SegmentResult& result,
                                        const std::vector<std::int64_t>& truth);

// frame,pred_label[,truth_label] rows, one per frame.
void write_segmentation_csv(const std::string& path, const SegmentResult& result,
                            const std::optional<std::vector<std::int64_t>>& truth);

std::string segmentation_summary_json(const SegmentResult& result,
                                      const ScanConfig& cfg,
                                      const std::optional<SegmentationScore>& score);

const char* feature_mode_name(FeatureMode mode);
FeatureMode feature_mode_from_name(const std::string& name);

}  // namespace seqembed
