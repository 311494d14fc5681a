#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "traveltime/error.hpp"

namespace traveltime::csv {

/// One data row with its 1-based line number in the source.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<std::string> split(std::string_view text, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    std::string_view field = text.substr(start, pos == std::string_view::npos ? text.npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/**
 * Reads a header-first CSV, checking that the header matches `columns`
 * exactly. Blank lines are skipped. Every data row must have the header's
 * field count.
 */
inline std::vector<Row> read(std::istream& in, const std::vector<std::string>& columns,
                             const std::string& source) {
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  std::vector<Row> rows;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (line == 1 && text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split(text);
    if (!have_header) {
      if (fields != columns) {
        std::string want;
        for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
        throw ParseError(source, line, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != columns.size()) {
      throw ParseError(source, line,
                       "expected " + std::to_string(columns.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    rows.push_back(Row{line, std::move(fields)});
  }
  if (!have_header) throw ParseError(source, line, "missing header row");
  return rows;
}

inline std::vector<Row> read_file(const std::string& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return read(in, columns, path);
}

template <typename T>
T parse_number(const Row& row, std::size_t col, const std::string& source) {
  const std::string& f = row.fields.at(col);
  T value{};
  const auto* end = f.data() + f.size();
  auto [ptr, ec] = std::from_chars(f.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(source, row.line, "field " + std::to_string(col + 1) + " ('" + f + "') is not a number");
  }
  return value;
}

/// Shortest round-trip decimal form of a double.
inline std::string format(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Comma-joined row writer: `write_row(out, a, b, c)`.
inline void put(std::ostream& out, double v) { out << format(v); }
inline void put(std::ostream& out, const std::string& v) { out << v; }
inline void put(std::ostream& out, const char* v) { out << v; }
template <typename T>
  requires std::is_integral_v<T>
inline void put(std::ostream& out, T v) { out << v; }

template <typename First, typename... Rest>
void write_row(std::ostream& out, const First& first, const Rest&... rest) {
  put(out, first);
  ((out << ',', put(out, rest)), ...);
  out << '\n';
}

}  // namespace traveltime::csv
