// SPDX-License-Identifier: Apache-2.0
#include "datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>

#include "csvio.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace seqembed {

namespace {

namespace fs = std::filesystem;

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

struct PatternSpec {
  double cx, cy;  // center
  double a, b;    // amplitudes
  double p, q;    // angular multipliers for x and y
};

// Planar prototypes for the multi-class corpus. Entries 0 and 1 are the
// unit circle and the (2,1) ellipse; entries 2, 8, 15, 17 and 22 revisit
// earlier loci at higher rates so some classes differ only temporally,
// while translations and Lissajous ratios separate the rest spatially.
const PatternSpec kPatterns[26] = {
    {0, 0, 1.0, 1.0, 1, 1},    // unit circle
    {0, 0, 2.0, 1.0, 1, 1},    // ellipse
    {0, 0, 1.0, 1.0, 2, 2},    // unit circle, double rate
    {3, 0, 1.0, 1.0, 1, 1},    // translated circle
    {0, 0, 1.5, 1.5, 1, 2},    // lissajous 1:2
    {0, 0, 1.5, 1.5, 2, 3},    // lissajous 2:3
    {0, 0, 1.5, 1.5, 3, 4},    // lissajous 3:4
    {0, 0, 1.0, 2.0, 1, 1},    // tall ellipse
    {0, 0, 1.0, 1.0, 3, 3},    // unit circle, triple rate
    {-3, 1, 2.0, 1.0, 1, 1},   // translated ellipse
    {0, 0, 1.5, 1.5, 1, 3},    // lissajous 1:3
    {0, 0, 1.5, 1.5, 3, 5},    // lissajous 3:5
    {0, 0, 0.5, 0.5, 1, 1},    // small circle
    {0, 0, 3.0, 1.0, 1, 1},    // wide ellipse
    {0, 0, 1.5, 1.5, 2, 5},    // lissajous 2:5
    {0, 3, 1.0, 1.0, 2, 2},    // translated circle, double rate
    {0, 0, 1.5, 1.5, 4, 5},    // lissajous 4:5
    {0, 0, 2.0, 1.0, 2, 2},    // ellipse, double rate
    {0, 0, 1.5, 1.5, 1, 4},    // lissajous 1:4
    {-2, -2, 2.0, 2.0, 1, 1},  // translated large circle
    {0, 0, 1.5, 1.5, 3, 7},    // lissajous 3:7
    {2, -2, 1.0, 3.0, 1, 1},   // translated tall ellipse
    {0, 0, 1.0, 1.0, 4, 4},    // unit circle, quadruple rate
    {0, 0, 1.5, 1.5, 5, 6},    // lissajous 5:6
    {0, 0, 4.0, 1.0, 1, 1},    // flat ellipse
    {0, 0, 1.5, 1.5, 2, 7},    // lissajous 2:7
};

Matrix pattern_rows(const PatternSpec& s, Index rows, double phase) {
  Matrix out(rows, 2);
  for (Index t = 0; t < rows; ++t) {
    const double th = phase + kTwoPi * static_cast<double>(t) / static_cast<double>(rows);
    out(t, 0) = s.cx + s.a * std::cos(s.p * th);
    out(t, 1) = s.cy + s.b * std::sin(s.q * th);
  }
  return out;
}

std::optional<std::int64_t> label_from_stem(const std::string& stem) {
  const auto pos = stem.rfind('_');
  if (pos == std::string::npos || pos + 1 >= stem.size()) return std::nullopt;
  std::int64_t value = 0;
  const char* first = stem.data() + pos + 1;
  const char* last = stem.data() + stem.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return value;
}

}  // namespace

Matrix gen_conic(const ConicSpec& spec) {
  if (spec.steps_per_period < 4)
    throw InvalidInput("gen_conic: steps_per_period must be at least 4");
  if (spec.radius_a < 0.0 || spec.radius_b < 0.0)
    throw InvalidInput("gen_conic: radii must be non-negative");
  if (!(spec.periods > 0.0)) throw InvalidInput("gen_conic: periods must be positive");
  if (!std::isfinite(spec.center_x) || !std::isfinite(spec.center_y) ||
      !std::isfinite(spec.phase) || !std::isfinite(spec.periods))
    throw InvalidInput("gen_conic: non-finite field");

  const Index rows = spec.steps_per_period;
  Matrix out(rows, 2);
  for (Index t = 0; t < rows; ++t) {
    const double th = spec.phase +
                      kTwoPi * spec.periods * static_cast<double>(t) /
                          static_cast<double>(rows);
    out(t, 0) = spec.center_x + spec.radius_a * std::cos(th);
    out(t, 1) = spec.center_y + spec.radius_b * std::sin(th);
  }
  return out;
}

SequenceBatch one_hot_augment(const SequenceBatch& batch, Index num_classes) {
  if (!batch.labels) throw InvalidInput("one_hot_augment: batch has no labels");
  if (num_classes < 1) throw InvalidInput("one_hot_augment: num_classes must be positive");
  if (batch.labels->size() != batch.sequences.size())
    throw InvalidInput("one_hot_augment: labels do not align with sequences");

  SequenceBatch out;
  out.labels = batch.labels;
  if (batch.feature_names) {
    out.feature_names = batch.feature_names;
    for (Index k = 0; k < num_classes; ++k)
      out.feature_names->push_back("class_" + std::to_string(k));
  }
  out.sequences.reserve(batch.sequences.size());
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const std::int64_t label = (*batch.labels)[i];
    if (label < 0 || label >= num_classes)
      throw InvalidInput("one_hot_augment: label out of range");
    const Matrix& seq = batch.sequences[i];
    Matrix aug = Matrix::Zero(seq.rows(), seq.cols() + num_classes);
    aug.leftCols(seq.cols()) = seq;
    aug.col(seq.cols() + label).setOnes();
    out.sequences.push_back(std::move(aug));
  }
  return out;
}

SeqPair make_pair(const Matrix& sequence, Index t_e, Index t_d, Index offset,
                  bool repeat) {
  if (t_e < 1 || t_d < 1) throw InvalidInput("make_pair: window lengths must be positive");
  if (offset < 0) throw InvalidInput("make_pair: negative offset");
  if (repeat) {
    if (t_d != t_e) throw InvalidInput("make_pair: repeat mode requires t_d == t_e");
    if (offset + t_e > sequence.rows())
      throw InvalidInput("make_pair: window exceeds sequence length");
    SeqPair out;
    out.X = sequence.middleRows(offset, t_e);
    out.Y = out.X;
    return out;
  }
  if (offset + t_e + t_d > sequence.rows())
    throw InvalidInput("make_pair: window exceeds sequence length");
  SeqPair out;
  out.X = sequence.middleRows(offset, t_e);
  out.Y = sequence.middleRows(offset + t_e, t_d);
  return out;
}

SequenceBatch gen_multiclass_corpus(Index num_classes, Index rows, std::uint64_t seed) {
  if (num_classes < 2 || num_classes > 26)
    throw InvalidInput("gen_multiclass_corpus: num_classes must be in [2, 26]");
  if (rows < 4) throw InvalidInput("gen_multiclass_corpus: rows must be at least 4");

  const Rng root(seed);
  SequenceBatch out;
  out.labels.emplace();
  out.feature_names = std::vector<std::string>{"x", "y"};
  for (Index k = 0; k < num_classes; ++k) {
    const double phase =
        root.fork(static_cast<std::uint64_t>(k)).uniform(0.0, kTwoPi);
    out.sequences.push_back(pattern_rows(kPatterns[k], rows, phase));
    out.labels->push_back(k);
  }
  return out;
}

SequenceBatch load_csv_dir(const std::string& path) {
  if (!fs::is_directory(path))
    throw IngestionError("load_csv_dir: not a directory", path, 0);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  if (files.empty()) throw IngestionError("load_csv_dir: no CSV files", path, 0);
  std::sort(files.begin(), files.end());

  SequenceBatch out;
  std::vector<std::int64_t> labels;
  bool all_labeled = true;
  for (const auto& file : files) {
    CsvTable table = read_numeric_csv(file.string());
    if (!out.sequences.empty() && table.values.cols() != out.sequences.front().cols())
      throw IngestionError("load_csv_dir: inconsistent feature count", file.string(), 0);
    if (out.sequences.empty() && table.header) out.feature_names = table.header;
    const auto label = label_from_stem(file.stem().string());
    if (label)
      labels.push_back(*label);
    else
      all_labeled = false;
    out.sequences.push_back(std::move(table.values));
  }
  if (all_labeled) out.labels = std::move(labels);
  return out;
}

void save_csv_dir(const SequenceBatch& batch, const std::string& path) {
  if (batch.sequences.empty()) throw InvalidInput("save_csv_dir: empty batch");
  if (batch.labels && batch.labels->size() != batch.sequences.size())
    throw InvalidInput("save_csv_dir: labels do not align with sequences");
  std::error_code ec;
  fs::create_directories(path, ec);
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    std::string name = "seq";
    std::string idx = std::to_string(i);
    name += std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx;
    if (batch.labels) name += "_" + std::to_string((*batch.labels)[i]);
    name += ".csv";
    write_numeric_csv((fs::path(path) / name).string(), batch.sequences[i],
                      batch.feature_names);
  }
}

ConcatResult concat_labeled(const SequenceBatch& batch, const std::vector<Index>& order) {
  if (order.empty()) throw InvalidInput("concat_labeled: empty order");
  if (!batch.labels) throw InvalidInput("concat_labeled: batch has no labels");
  Index total = 0;
  for (const Index idx : order) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= batch.sequences.size())
      throw InvalidInput("concat_labeled: index out of range");
    total += batch.sequences[static_cast<std::size_t>(idx)].rows();
  }
  ConcatResult out;
  out.frames.resize(total, batch.sequences.front().cols());
  out.frame_labels.reserve(static_cast<std::size_t>(total));
  Index row = 0;
  for (const Index idx : order) {
    const Matrix& seq = batch.sequences[static_cast<std::size_t>(idx)];
    out.frames.middleRows(row, seq.rows()) = seq;
    row += seq.rows();
    const std::int64_t label = (*batch.labels)[static_cast<std::size_t>(idx)];
    for (Index t = 0; t < seq.rows(); ++t) out.frame_labels.push_back(label);
  }
  return out;
}

}  // namespace seqembed
