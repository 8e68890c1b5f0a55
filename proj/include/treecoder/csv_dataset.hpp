#pragma once

// CSV datasets: a header row, then comma-separated reals per line. When the
// last header column is named "label" that column holds integer class ids.

#include <charconv>
#include <concepts>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"

namespace treecoder {

namespace detail {

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw FormatError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  return v;
}

}  // namespace detail

template <std::floating_point T = double>
Dataset<T> parse_csv_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV dataset has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_commas(line);
  const bool labelled = !header.empty() && header.back() == "label";
  const std::size_t dim = header.size() - (labelled ? 1 : 0);
  if (dim == 0) throw FormatError("CSV dataset has no feature columns");

  std::vector<T> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " columns, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = detail::parse_real(cells[j], line_no);
      if (!std::isfinite(v)) throw FormatError("line " + std::to_string(line_no) + ": non-finite value");
      values.push_back(static_cast<T>(v));
    }
    if (labelled) {
      int l = 0;
      const auto& s = cells.back();
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), l);
      if (ec != std::errc{} || p != s.data() + s.size() || l < 0)
        throw FormatError("line " + std::to_string(line_no) + ": bad label '" + s + "'");
      labels.push_back(l);
    }
    ++rows;
  }
  Dataset<T> ds(Matrix<T>(rows, dim));
  std::copy(values.begin(), values.end(), ds.instances.flat().begin());
  if (labelled) ds.labels = std::move(labels);
  return ds;
}

template <std::floating_point T = double>
Dataset<T> load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv_dataset<T>(in);
}

}  // namespace treecoder
