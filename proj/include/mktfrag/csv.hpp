#pragma once

// Minimal CSV tables: a header plus string cells. Numbers are written with
// 17 significant digits so that a table read back is bit-identical.

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace mktfrag {

inline std::string format_number(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw IoError("table has no column '" + name + "'");
  }

  const std::string& cell(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }

  double number(std::size_t row, const std::string& name) const {
    const std::string& s = cell(row, name);
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw IoError("not a number in column " + name + ": '" + s + "'");
    return x;
  }

  /// Appends a row; doubles are formatted, strings kept verbatim.
  template <typename... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> row;
    (row.push_back(to_cell(cells)), ...);
    rows.push_back(std::move(row));
  }

  static std::string to_cell(const std::string& s) { return s; }
  static std::string to_cell(const char* s) { return s; }
  static std::string to_cell(double x) { return format_number(x); }
  static std::string to_cell(int x) { return std::to_string(x); }
  static std::string to_cell(long x) { return std::to_string(x); }
  static std::string to_cell(long long x) { return std::to_string(x); }
  static std::string to_cell(unsigned x) { return std::to_string(x); }
  static std::string to_cell(unsigned long x) { return std::to_string(x); }
  static std::string to_cell(unsigned long long x) { return std::to_string(x); }
  static std::string to_cell(bool b) { return b ? "1" : "0"; }
};

inline std::string quote_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t k = 0; k < t.header.size(); ++k) os << (k ? "," : "") << quote_cell(t.header[k]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << quote_cell(row[k]);
    os << '\n';
  }
}

inline std::string to_csv(const Table& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  return cells;
}

inline Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV input");
  t.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) throw IoError("CSV row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table parse_csv(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

}  // namespace mktfrag
