#pragma once

// Numeric CSV panels. Cells are separated by commas; an empty cell or the
// literal NaN marks a missing value. A first row with any non-numeric,
// non-missing cell is treated as a header.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sidemat/types.hpp"

namespace sidemat {

/// Malformed input. `line` and `column` are 1-based; 0 means not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    std::string s = "line " + std::to_string(line);
    if (column > 0) s += ", column " + std::to_string(column);
    return s + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  Matrix values;                     // NaN where missing
  std::vector<std::string> header;   // empty when the file had none
  Index missing = 0;

  ObservationMask observed() const {
    ObservationMask m{ObservationMask::Cells(values.rows(), values.cols()),
                      missing == 0 ? MaskPattern::full : MaskPattern::general};
    for (Index t = 0; t < values.cols(); ++t)
      for (Index i = 0; i < values.rows(); ++i) m.cells(i, t) = std::isnan(values(i, t)) ? 0 : 1;
    return m;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "NaN" || s == "nan"; }

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

struct CsvReadOptions {
  bool allow_missing = true;
  std::string what = "csv";  // used in error messages
};

inline CsvTable read_csv(std::istream& in, const CsvReadOptions& opts = {}) {
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_cells(line);
    if (first) {
      first = false;
      bool header = false;
      for (auto c : cells)
        if (!detail::is_missing_token(c) && !detail::parse_number(c)) header = true;
      width = cells.size();
      if (header) {
        for (auto c : cells) table.header.emplace_back(c);
        continue;
      }
    }
    if (cells.size() != width)
      throw ParseError(opts.what + ": expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, std::min(cells.size(), width) + 1);
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (detail::is_missing_token(cells[j])) {
        if (!opts.allow_missing) throw ParseError(opts.what + ": missing value not allowed", line_no, j + 1);
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        ++table.missing;
        continue;
      }
      const auto v = detail::parse_number(cells[j]);
      if (!v) throw ParseError(opts.what + ": non-numeric cell '" + std::string(cells[j]) + "'", line_no, j + 1);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(opts.what + ": no data rows", line_no, 0);
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return table;
}

inline CsvTable read_csv_file(const std::string& path, const CsvReadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvReadOptions o = opts;
  if (o.what == "csv") o.what = path;
  return read_csv(in, o);
}

/// A 0/1 mask file of the given shape.
inline ObservationMask read_mask_file(const std::string& path) {
  const CsvTable t = read_csv_file(path, {false, path});
  ObservationMask m{ObservationMask::Cells(t.values.rows(), t.values.cols()), MaskPattern::general};
  for (Index c = 0; c < t.values.cols(); ++c)
    for (Index i = 0; i < t.values.rows(); ++i) {
      const double v = t.values(i, c);
      if (v != 0.0 && v != 1.0)
        throw ParseError(path + ": mask entries must be 0 or 1",
                         static_cast<std::size_t>(i) + 1 + (t.header.empty() ? 0 : 1),
                         static_cast<std::size_t>(c) + 1);
      m.cells(i, c) = v == 1.0 ? 1 : 0;
    }
  if (m.count() == m.cells.size()) m.pattern = MaskPattern::full;
  return m;
}

/// %.10g per cell; NaN is written as NaN.
inline void write_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      if (std::isnan(m(i, j))) {
        out << "NaN";
      } else {
        std::snprintf(buf, sizeof buf, "%.10g", m(i, j));
        out << buf;
      }
    }
    out << '\n';
  }
}

inline void write_csv_file(const std::string& path, const Matrix& m, const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, m, header);
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline void write_mask_file(const std::string& path, const ObservationMask& mask) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (Index i = 0; i < mask.rows(); ++i) {
    for (Index j = 0; j < mask.cols(); ++j) out << (j ? "," : "") << static_cast<int>(mask.cells(i, j));
    out << '\n';
  }
}

/// Value formatted the way write_csv prints it.
inline std::string format_g10(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace sidemat
