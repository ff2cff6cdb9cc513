#include "embalign/io/csv.hpp"

#include "embalign/error.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <vector>

namespace embalign::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<std::vector<double>> parse_line(std::string_view line) {
  std::vector<double> out;
  while (true) {
    const auto comma = line.find(',');
    const std::string_view cell = trim(line.substr(0, comma));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

Matrix parse_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty()) continue;
    auto parsed = parse_line(line);
    if (!parsed) {
      if (rows.empty() && line_no == 1) continue;
      throw Error(ErrorKind::Data, "csv: line " + std::to_string(line_no) + " has a non-numeric cell");
    }
    for (double v : *parsed) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Data, "csv: line " + std::to_string(line_no) + " has a non-finite cell");
    }
    if (!rows.empty() && parsed->size() != rows.front().size()) {
      throw Error(ErrorKind::Data, "csv: line " + std::to_string(line_no) + " has " +
                                       std::to_string(parsed->size()) + " cells, expected " +
                                       std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(*parsed));
  }
  Matrix M(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return M;
}

}  // namespace embalign::io
