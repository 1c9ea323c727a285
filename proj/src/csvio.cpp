// SPDX-License-Identifier: Apache-2.0
#include "csvio.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace fs = std::filesystem;

namespace seqembed {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::optional<double> parse_double(const std::string& cell) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  if (begin == end) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    for (const auto& line : lines) out << line << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed: " + target.string() + ": " + ec.message());
}

CsvTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open file: " + path, path, 0);

  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t lineno = 0;
  std::size_t width = 0;
  bool saw_data = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);

    if (!saw_data) {
      bool numeric = true;
      for (const auto& cell : cells) {
        if (!parse_double(cell)) {
          numeric = false;
          break;
        }
      }
      if (!numeric && lineno == 1) {
        std::vector<std::string> names;
        for (auto& cell : cells) {
          while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
          names.push_back(cell);
        }
        table.header = std::move(names);
        width = cells.size();
        continue;
      }
    }

    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": ragged row, expected " << width << " cells, got "
          << cells.size();
      throw IngestionError(msg.str(), path, lineno);
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto value = parse_double(cells[c]);
      if (!value) {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": non-numeric cell '" << cells[c] << "' in column "
            << (c + 1);
        throw IngestionError(msg.str(), path, lineno);
      }
      row.push_back(*value);
    }
    rows.push_back(std::move(row));
    saw_data = true;
  }

  if (rows.empty()) throw IngestionError(path + ": no data rows", path, lineno);

  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

void write_numeric_csv(const std::string& path, const Matrix& values,
                       const std::optional<std::vector<std::string>>& header) {
  std::vector<std::string> lines;
  lines.reserve(static_cast<std::size_t>(values.rows()) + 1);
  if (header) {
    std::string h;
    for (std::size_t i = 0; i < header->size(); ++i) {
      if (i) h += ',';
      h += (*header)[i];
    }
    lines.push_back(std::move(h));
  }
  for (Index r = 0; r < values.rows(); ++r) {
    std::string row;
    for (Index c = 0; c < values.cols(); ++c) {
      if (c) row += ',';
      row += format_double(values(r, c));
    }
    lines.push_back(std::move(row));
  }
  write_lines_atomic(path, lines);
}

}  // namespace seqembed
