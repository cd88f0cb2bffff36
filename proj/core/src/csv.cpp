#include "mlpenergy/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "mlpenergy/errors.hpp"

namespace mlpe::csv {

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end())
    raise(errc::parse, source + ": missing required column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

Table read_table(std::istream& in, std::string source_name) {
  Table table;
  table.source = std::move(source_name);
  std::string line;
  if (!std::getline(in, line))
    raise(errc::parse, table.source + ": empty file, header row required");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  table.columns = split(line, ',');
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto fields = split(line, ',');
    if (fields.size() != table.columns.size())
      raise(errc::parse, table.source + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.columns.size()) + " fields, got " +
                             std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  return table;
}

Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(errc::parse, "cannot open '" + path + "'");
  return read_table(in, path);
}

double field_double(const Table& t, std::size_t row, std::size_t col) {
  const std::string& text = t.rows[row][col];
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE)
    raise(errc::parse, t.source + ":" + std::to_string(Table::line_of_row(row)) +
                           ": bad numeric value '" + text + "' in column '" + t.columns[col] + "'");
  return value;
}

std::int64_t field_int(const Table& t, std::size_t row, std::size_t col) {
  const std::string& text = t.rows[row][col];
  errno = 0;
  char* end = nullptr;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE)
    raise(errc::parse, t.source + ":" + std::to_string(Table::line_of_row(row)) +
                           ": bad integer value '" + text + "' in column '" + t.columns[col] + "'");
  return static_cast<std::int64_t>(value);
}

std::string format_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

} // namespace mlpe::csv
