#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace mlpe::csv {

// Minimal delimited-text table. Comma separated, one header row, no quoting;
// field values must not contain the delimiter.
struct Table {
  std::string source; // file name for diagnostics
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Index of a required column; errc::parse when absent.
  std::size_t column(std::string_view name) const;
  // 1-based data line number for error messages (header is line 1).
  static std::size_t line_of_row(std::size_t row_index) { return row_index + 2; }
};

Table read_table(std::istream& in, std::string source_name);
Table read_table_file(const std::string& path);

// Field accessors with file/line diagnostics on conversion failure.
double field_double(const Table& t, std::size_t row, std::size_t col);
std::int64_t field_int(const Table& t, std::size_t row, std::size_t col);

std::vector<std::string> split(std::string_view line, char delimiter);

// Fixed significant-digit formatting used for all numeric CLI/table output.
std::string format_number(double value);

} // namespace mlpe::csv
