#pragma once

// Minimal CSV reading: comma-separated, no quoting. LF line endings with an
// optional trailing newline; a stray CR before the LF is dropped.

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rankmil::detail {

struct CsvLine {
  std::size_t number;  // 1-based
  std::vector<std::string> cells;
};

inline std::vector<std::string> split_cells(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

/// Splits text into lines. A final empty line (trailing newline) is dropped;
/// interior blank lines are kept so callers can reject them with a line number.
inline std::vector<CsvLine> parse_csv(std::string_view text) {
  std::vector<CsvLine> lines;
  std::size_t start = 0;
  std::size_t number = 1;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    const bool last = end == std::string_view::npos;
    if (last) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({number, split_cells(line)});
    ++number;
    start = end + 1;
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Parses a finite decimal; nullopt for anything else (including inf/nan).
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool is_blank_line(const CsvLine& line) {
  return line.cells.size() == 1 && trim(line.cells[0]).empty();
}

}  // namespace rankmil::detail
