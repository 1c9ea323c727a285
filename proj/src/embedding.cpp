// SPDX-License-Identifier: Apache-2.0
#include "embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>

#include "csvio.hpp"
#include "errors.hpp"
#include "numcore.hpp"

namespace seqembed {

namespace {

std::string optional_int_cell(const std::optional<std::int64_t>& value) {
  return value ? std::to_string(*value) : std::string();
}

std::optional<std::int64_t> parse_optional_int(const std::string& cell,
                                               const std::string& path,
                                               std::int64_t line) {
  if (cell.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw IngestionError("trajectory csv: malformed integer cell", path, line);
  return value;
}

}  // namespace

Matrix assemble_state_matrix(const StateBundle& bundle) {
  if (bundle.E.cols() != bundle.D.cols())
    throw InvalidInput("assemble_state_matrix: encoder/decoder width mismatch");
  Matrix s(bundle.E.rows() + bundle.D.rows(), bundle.E.cols());
  s.topRows(bundle.E.rows()) = bundle.E;
  s.bottomRows(bundle.D.rows()) = bundle.D;
  return s;
}

Matrix assemble_global(const std::vector<Matrix>& s_list) {
  if (s_list.empty()) throw InvalidInput("assemble_global: empty list");
  const Index cols = s_list.front().cols();
  Index rows = 0;
  for (const Matrix& s : s_list) {
    if (s.cols() != cols) throw InvalidInput("assemble_global: width mismatch");
    rows += s.rows();
  }
  Matrix global(rows, cols);
  Index at = 0;
  for (const Matrix& s : s_list) {
    global.middleRows(at, s.rows()) = s;
    at += s.rows();
  }
  return global;
}

PODBasis pod(const Matrix& global) {
  if (global.rows() < 2) throw InvalidInput("pod: need at least 2 rows");
  const CenterResult centered = center_rows(global);
  const SVDResult dec = svd(centered.centered);
  PODBasis basis;
  basis.mean = centered.mean;
  basis.sigma = dec.sigma;
  basis.modes = dec.V;
  basis.source_rows = global.rows();
  basis.source_cols = global.cols();
  return basis;
}

Index mode_count(const Vector& sigma, double p) {
  if (sigma.size() < 1) throw InvalidInput("mode_count: empty sigma");
  if (!(p > 0.0) || p > 1.0) throw InvalidInput("mode_count: p must be in (0, 1]");
  double total = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) < 0.0 || (i > 0 && sigma(i) > sigma(i - 1)))
      throw InvalidInput("mode_count: sigma must be descending and non-negative");
    total += sigma(i) * sigma(i);
  }
  if (total == 0.0) throw InvalidInput("mode_count: all singular values are zero");
  double cum = 0.0;
  for (Index k = 0; k < sigma.size(); ++k) {
    cum += sigma(k) * sigma(k);
    if (cum / total >= p) return k + 1;
  }
  return sigma.size();  // rounding guard; p <= 1 always lands earlier
}

Trajectory project(const Matrix& a, const PODBasis& basis, Index n) {
  if (a.cols() != basis.source_cols)
    throw InvalidInput("project: column count does not match the basis");
  if (n < 1 || n > basis.modes.cols())
    throw InvalidInput("project: requested mode count exceeds the basis rank");
  Trajectory out;
  out.points = (a.rowwise() - basis.mean.transpose()) * basis.modes.leftCols(n);
  return out;
}

std::pair<RowVec, RowVec> endpoints(const Trajectory& traj) {
  if (traj.points.rows() < 1) throw InvalidInput("endpoints: empty trajectory");
  return {traj.points.row(0), traj.points.row(traj.points.rows() - 1)};
}

Matrix prepend_zero_row(const Matrix& m) {
  Matrix out = Matrix::Zero(m.rows() + 1, m.cols());
  out.bottomRows(m.rows()) = m;
  return out;
}

const char* trajectory_kind_name(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::encoder: return "encoder";
    case TrajectoryKind::decoder: return "decoder";
    case TrajectoryKind::combined: return "combined";
  }
  return "combined";
}

TrajectoryKind trajectory_kind_from_name(const std::string& name) {
  if (name == "encoder") return TrajectoryKind::encoder;
  if (name == "decoder") return TrajectoryKind::decoder;
  if (name == "combined") return TrajectoryKind::combined;
  throw InvalidInput("unknown trajectory kind: " + name);
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty())
    throw InvalidInput("write_trajectory_csv: nothing to write");
  const Index n = trajectories.front().points.cols();
  for (const Trajectory& traj : trajectories) {
    if (traj.points.rows() < 1)
      throw InvalidInput("write_trajectory_csv: empty trajectory");
    if (traj.points.cols() != n)
      throw InvalidInput("write_trajectory_csv: mixed point dimensions");
  }

  std::vector<std::string> lines;
  std::string header = "iter,kind,type_label,t";
  for (Index c = 0; c < n; ++c) header += ",pc" + std::to_string(c + 1);
  lines.push_back(std::move(header));
  for (const Trajectory& traj : trajectories) {
    for (Index t = 0; t < traj.points.rows(); ++t) {
      std::string line = optional_int_cell(traj.iteration);
      line += ',';
      line += trajectory_kind_name(traj.kind);
      line += ',';
      line += optional_int_cell(traj.type_label);
      line += ',';
      line += std::to_string(t);
      for (Index c = 0; c < n; ++c) {
        line += ',';
        line += format_double(traj.points(t, c));
      }
      lines.push_back(std::move(line));
    }
  }
  write_lines_atomic(path, lines);
}

std::vector<Trajectory> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("trajectory csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw IngestionError("trajectory csv: empty file", path, 1);
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "iter" || header[1] != "kind" ||
      header[2] != "type_label" || header[3] != "t")
    throw IngestionError("trajectory csv: unexpected header", path, 1);
  const Index n = static_cast<Index>(header.size()) - 4;

  std::vector<Trajectory> out;
  std::vector<RowVec> rows;
  Trajectory current;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    current.points.resize(static_cast<Index>(rows.size()), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
      current.points.row(static_cast<Index>(i)) = rows[i];
    out.push_back(std::move(current));
    current = Trajectory();
    rows.clear();
    open = false;
  };

  std::int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != n + 4)
      throw IngestionError("trajectory csv: wrong cell count", path, lineno);
    const auto iter = parse_optional_int(cells[0], path, lineno);
    const TrajectoryKind kind = trajectory_kind_from_name(cells[1]);
    const auto label = parse_optional_int(cells[2], path, lineno);
    const auto t = parse_optional_int(cells[3], path, lineno);
    if (!t) throw IngestionError("trajectory csv: missing t", path, lineno);
    if (*t == 0) {
      flush();
      current.iteration = iter;
      current.kind = kind;
      current.type_label = label;
      open = true;
    } else if (!open || *t != static_cast<std::int64_t>(rows.size()) ||
               iter != current.iteration || kind != current.kind ||
               label != current.type_label) {
      throw IngestionError("trajectory csv: rows out of order", path, lineno);
    }
    RowVec point(n);
    for (Index c = 0; c < n; ++c) {
      const auto value = parse_double(cells[static_cast<std::size_t>(c + 4)]);
      if (!value)
        throw IngestionError("trajectory csv: malformed number", path, lineno);
      point(c) = *value;
    }
    rows.push_back(std::move(point));
  }
  flush();
  if (out.empty()) throw IngestionError("trajectory csv: no data rows", path, 0);
  return out;
}

}  // namespace seqembed
