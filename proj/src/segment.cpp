// SPDX-License-Identifier: Apache-2.0
#include "segment.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clusterlab.hpp"
#include "csvio.hpp"
#include "errors.hpp"

namespace seqembed {

ScanResult scan_windows(const Matrix& seq, const SeqModelParams& model,
                        const ScanConfig& cfg) {
  if (cfg.t_e < 1 || cfg.t_d < 1)
    throw InvalidInput("scan_windows: window sides must be positive");
  if (cfg.stride < 1) throw InvalidInput("scan_windows: stride must be at least 1");
  if (seq.cols() != model.config.input_dim)
    throw InvalidInput("scan_windows: sequence width does not match the model input");
  const Index window = cfg.t_e + cfg.t_d;
  if (seq.rows() < window)
    throw InvalidInput("scan_windows: sequence shorter than one window");

  ScanResult out;
  out.frames = seq.rows();
  for (Index start = 0; start + window <= seq.rows(); start += cfg.stride) {
    const StateBundle bundle =
        forward(seq.middleRows(start, cfg.t_e), model, cfg.t_d);
    WindowFeatures wf;
    wf.start = start;
    if (cfg.feature_mode == FeatureMode::window_mean)
      wf.features = bundle.D.colwise().mean();
    else
      wf.features = bundle.D;
    out.windows.push_back(std::move(wf));
  }
  return out;
}

SegmentResult label_frames(const ScanResult& scan, const ScanConfig& cfg,
                           const PODBasis& basis, Index n) {
  if (cfg.k < 2) throw InvalidInput("label_frames: k must be at least 2");
  if (n < 0) throw InvalidInput("label_frames: negative projection width");
  const Index p = static_cast<Index>(scan.windows.size());
  if (p < cfg.k) throw InvalidInput("label_frames: fewer windows than clusters");

  const Index rows_per = cfg.feature_mode == FeatureMode::window_mean ? 1 : cfg.t_d;
  const Index total = p * rows_per;
  Matrix stacked(total, scan.windows.front().features.cols());
  for (Index i = 0; i < p; ++i) {
    const Matrix& f = scan.windows[static_cast<std::size_t>(i)].features;
    if (f.rows() != rows_per || f.cols() != stacked.cols())
      throw InvalidInput("label_frames: window " + std::to_string(i) +
                         " feature shape does not match the feature mode");
    stacked.middleRows(i * rows_per, rows_per) = f;
  }

  const Index rank = basis.sigma.size();
  const Index width = (n == 0 || n > rank) ? rank : n;
  const Trajectory proj = project(stacked, basis, width);

  double raw_scale = 0.0, centered_scale = 0.0;
  for (Index i = 0; i < total; ++i) {
    raw_scale = std::max(raw_scale, stacked.row(i).norm());
    centered_scale = std::max(centered_scale, proj.points.row(i).norm());
  }

  std::vector<std::int64_t> row_labels(static_cast<std::size_t>(total));
  if (centered_scale <= 1e-10 * std::max(raw_scale, 1.0)) {
    // Identical windows up to rounding: every pairwise distance is zero, so
    // the smallest-pair merge order grows one cluster and strands k-1
    // singletons at the tail.
    for (Index i = 0; i < total; ++i)
      row_labels[static_cast<std::size_t>(i)] =
          i <= total - cfg.k ? 0 : i - (total - cfg.k);
  } else {
    PointSet ps;
    ps.points = proj.points;
    row_labels = agglomerative_cosine(ps, cfg.k).labels;
  }

  SegmentResult out;
  out.window_labels.resize(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    if (rows_per == 1) {
      out.window_labels[static_cast<std::size_t>(i)] =
          row_labels[static_cast<std::size_t>(i)];
      continue;
    }
    // Majority label over the window's rows, ties to the smaller cluster id.
    std::vector<Index> counts(static_cast<std::size_t>(cfg.k), 0);
    for (Index r = 0; r < rows_per; ++r)
      ++counts[static_cast<std::size_t>(
          row_labels[static_cast<std::size_t>(i * rows_per + r)])];
    Index best = 0;
    for (Index c = 1; c < cfg.k; ++c)
      if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)])
        best = c;
    out.window_labels[static_cast<std::size_t>(i)] = best;
  }

  std::vector<Index> label_windows(static_cast<std::size_t>(cfg.k), 0);
  for (const std::int64_t label : out.window_labels)
    ++label_windows[static_cast<std::size_t>(label)];
  for (const Index count : label_windows)
    if (count == 1) ++out.singleton_clusters;

  // Majority vote over the decoder spans covering each frame; a frame no
  // span covers (before the first, past the last, or inside a stride gap)
  // takes the nearest span's label, earlier window on ties.
  out.frame_labels.resize(static_cast<std::size_t>(scan.frames));
  std::vector<Index> votes(static_cast<std::size_t>(cfg.k));
  std::vector<Index> earliest(static_cast<std::size_t>(cfg.k));
  for (Index f = 0; f < scan.frames; ++f) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(earliest.begin(), earliest.end(), p);
    bool covered = false;
    Index nearest_dist = scan.frames;
    Index nearest_window = 0;
    for (Index i = 0; i < p; ++i) {
      const Index lo = scan.windows[static_cast<std::size_t>(i)].start + cfg.t_e;
      const Index hi = lo + cfg.t_d;
      if (f >= lo && f < hi) {
        covered = true;
        const auto label =
            static_cast<std::size_t>(out.window_labels[static_cast<std::size_t>(i)]);
        ++votes[label];
        earliest[label] = std::min(earliest[label], i);
      } else {
        const Index dist = f < lo ? lo - f : f - (hi - 1);
        if (dist < nearest_dist) {
          nearest_dist = dist;
          nearest_window = i;
        }
      }
    }
    if (covered) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best] ||
            (votes[c] == votes[best] && earliest[c] < earliest[best]))
          best = c;
      out.frame_labels[static_cast<std::size_t>(f)] = static_cast<std::int64_t>(best);
    } else {
      out.frame_labels[static_cast<std::size_t>(f)] =
          out.window_labels[static_cast<std::size_t>(nearest_window)];
    }
  }

  for (Index f = 1; f < scan.frames; ++f)
    if (out.frame_labels[static_cast<std::size_t>(f)] !=
        out.frame_labels[static_cast<std::size_t>(f - 1)])
      out.boundaries.push_back(f);
  return out;
}

SegmentationScore evaluate_segmentation(const SegmentResult& result,
                                        const std::vector<std::int64_t>& truth) {
  if (truth.size() != result.frame_labels.size())
    throw InvalidInput("evaluate_segmentation: length mismatch");
  SegmentationScore score;
  score.matched_accuracy = matched_accuracy(result.frame_labels, truth);
  score.ari = ari(result.frame_labels, truth);
  const Index frames = static_cast<Index>(truth.size());
  for (std::size_t f = 1; f < truth.size(); ++f) {
    if (truth[f] == truth[f - 1]) continue;
    Index best = frames;
    for (const Index predicted : result.boundaries)
      best = std::min(best, std::abs(predicted - static_cast<Index>(f)));
    score.boundary_errors.push_back(best);
  }
  return score;
}

void write_segmentation_csv(const std::string& path, const SegmentResult& result,
                            const std::optional<std::vector<std::int64_t>>& truth) {
  if (truth && truth->size() != result.frame_labels.size())
    throw InvalidInput("write_segmentation_csv: truth length mismatch");
  std::vector<std::string> lines;
  lines.push_back("frame,pred_label,truth_label");
  for (std::size_t f = 0; f < result.frame_labels.size(); ++f) {
    std::string line = std::to_string(f);
    line += ',';
    line += std::to_string(result.frame_labels[f]);
    line += ',';
    if (truth) line += std::to_string((*truth)[f]);
    lines.push_back(std::move(line));
  }
  write_lines_atomic(path, lines);
}

std::string segmentation_summary_json(const SegmentResult& result,
                                      const ScanConfig& cfg,
                                      const std::optional<SegmentationScore>& score) {
  nlohmann::json doc;
  doc["k"] = cfg.k;
  doc["stride"] = cfg.stride;
  doc["feature_mode"] = feature_mode_name(cfg.feature_mode);
  doc["boundaries"] = result.boundaries;
  doc["singleton_clusters"] = result.singleton_clusters;
  if (score) {
    doc["accuracy"] = score->matched_accuracy;
    doc["ari"] = score->ari;
    doc["boundary_errors"] = score->boundary_errors;
  } else {
    doc["accuracy"] = nullptr;
    doc["ari"] = nullptr;
  }
  return doc.dump();
}

const char* feature_mode_name(FeatureMode mode) {
  return mode == FeatureMode::window_mean ? "window-mean" : "all-rows";
}

FeatureMode feature_mode_from_name(const std::string& name) {
  if (name == "window-mean") return FeatureMode::window_mean;
  if (name == "all-rows") return FeatureMode::all_rows;
  throw InvalidInput("feature_mode_from_name: unknown mode " + name);
}

}  // namespace seqembed
