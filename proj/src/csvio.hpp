// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace seqembed {

// Doubles are written with 17 significant digits so every value round-trips
// bit-exactly through the text form.
std::string format_double(double value);

// Parses one numeric cell; returns nullopt on malformed input.
std::optional<double> parse_double(const std::string& cell);

std::vector<std::string> split_csv_line(const std::string& line);

// Writes lines to path via a temp file in the same directory plus rename.
void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines);

struct CsvTable {
  std::optional<std::vector<std::string>> header;
  Matrix values;
};

// Reads a numeric CSV. A first line with any non-numeric cell is treated as
// the header. Ragged or non-numeric data rows raise IngestionError carrying
// the file name and 1-based line number.
CsvTable read_numeric_csv(const std::string& path);

void write_numeric_csv(const std::string& path, const Matrix& values,
                       const std::optional<std::vector<std::string>>& header);

}  // namespace seqembed
