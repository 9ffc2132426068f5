#pragma once

// Text exchange formats.
//
// TNS3:  `tns3 <n> <m> <l>`, then l blocks of m lines; each line holds the n
//        link values of one column fiber. Lines starting with '#' are comments.
// CPM:   `cpm <n> <m> <l> <r>`, then the rows of U, V and Q (one matrix row
//        per line), matrices separated by a `---` line.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

namespace detail {

inline std::string format_double(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t p = 0;
  while (p < line.size()) {
    while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '\r')) ++p;
    std::size_t q = p;
    while (q < line.size() && line[q] != ' ' && line[q] != '\t' && line[q] != '\r') ++q;
    if (q > p) out.push_back(line.substr(p, q - p));
    p = q;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(line_no, "non-numeric token '" + std::string(tok) + "'");
  return v;
}

inline Index parse_dim(std::string_view tok, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 1)
    throw ParseError(line_no, "invalid dimension '" + std::string(tok) + "'");
  return static_cast<Index>(v);
}

/// Non-comment, non-blank lines with their 1-based line numbers.
struct ContentLines {
  std::vector<std::string> text;
  std::vector<std::size_t> number;
  std::size_t last_line = 0;
};

inline ContentLines content_lines(std::istream& in) {
  ContentLines out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    out.text.push_back(line);
    out.number.push_back(no);
  }
  out.last_line = no;
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// Reads a TNS3 stream. With `require_unit_range` every value must lie in
/// [0, 1]; otherwise values need only be nonnegative (predictions may
/// exceed 1).
inline DenseTensor3 parse_tns3(std::istream& in, bool require_unit_range = true) {
  const auto lines = detail::content_lines(in);
  if (lines.text.empty()) throw ParseError(lines.last_line, "missing 'tns3 <n> <m> <l>' header");
  const auto header = detail::split_ws(lines.text[0]);
  if (header.size() != 4 || header[0] != "tns3")
    throw ParseError(lines.number[0], "malformed header, expected 'tns3 <n> <m> <l>'");
  const Index n = detail::parse_dim(header[1], lines.number[0]);
  const Index m = detail::parse_dim(header[2], lines.number[0]);
  const Index l = detail::parse_dim(header[3], lines.number[0]);
  const std::size_t expected = static_cast<std::size_t>(m * l), found = lines.text.size() - 1;
  if (found != expected)
    throw ParseError(found < expected ? lines.last_line : lines.number[expected + 1],
                     "expected " + std::to_string(expected) + " data lines, found " + std::to_string(found));
  DenseTensor3 t(n, m, l);
  for (std::size_t row = 0; row < expected; ++row) {
    const std::size_t no = lines.number[row + 1];
    const auto toks = detail::split_ws(lines.text[row + 1]);
    if (static_cast<Index>(toks.size()) != n)
      throw ParseError(no, "expected " + std::to_string(n) + " values, found " + std::to_string(toks.size()));
    const Index j = static_cast<Index>(row) % m, k = static_cast<Index>(row) / m;
    for (Index i = 0; i < n; ++i) {
      const double v = detail::parse_double(toks[i], no);
      if (v < 0.0 || (require_unit_range && v > 1.0))
        throw ParseError(no, "value " + std::string(toks[i]) + (require_unit_range ? " outside [0, 1]" : " is negative"));
      t(i, j, k) = v;
    }
  }
  return t;
}

/// Writes a TNS3 stream at 12 significant digits, one comment line per
/// sequence block.
inline void write_tns3(std::ostream& out, const DenseTensor3& t) {
  out << "tns3 " << t.n() << ' ' << t.m() << ' ' << t.l() << '\n';
  for (Index k = 0; k < t.l(); ++k) {
    out << "# sequence " << k << '\n';
    for (Index j = 0; j < t.m(); ++j) {
      for (Index i = 0; i < t.n(); ++i) {
        if (i) out << ' ';
        out << detail::format_double(t(i, j, k), 12);
      }
      out << '\n';
    }
  }
}

inline TrafficTensor read_tns3(const std::string& path) {
  auto in = detail::open_input(path);
  return TrafficTensor(parse_tns3(in, true));
}

/// Reads predictions, which are nonnegative but not capped at 1.
inline DenseTensor3 read_tns3_unbounded(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_tns3(in, false);
}

inline void write_tns3(const DenseTensor3& t, const std::string& path) {
  auto out = detail::open_output(path);
  write_tns3(out, t);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline CPModel parse_cpm(std::istream& in) {
  const auto lines = detail::content_lines(in);
  if (lines.text.empty()) throw ParseError(lines.last_line, "missing 'cpm <n> <m> <l> <r>' header");
  const auto header = detail::split_ws(lines.text[0]);
  if (header.size() != 5 || header[0] != "cpm")
    throw ParseError(lines.number[0], "malformed header, expected 'cpm <n> <m> <l> <r>'");
  Index dims[4];
  for (int d = 0; d < 4; ++d) dims[d] = detail::parse_dim(header[d + 1], lines.number[0]);
  const Index r = dims[3];
  const std::size_t expected = static_cast<std::size_t>(dims[0] + dims[1] + dims[2] + 2);
  if (lines.text.size() - 1 != expected)
    throw ParseError(lines.last_line, "expected " + std::to_string(expected) + " lines after the header, found " +
                                          std::to_string(lines.text.size() - 1));
  CPModel model;
  Matrix* targets[3] = {&model.U, &model.V, &model.Q};
  std::size_t cursor = 1;
  for (int f = 0; f < 3; ++f) {
    if (f > 0) {
      if (detail::split_ws(lines.text[cursor]) != std::vector<std::string_view>{"---"})
        throw ParseError(lines.number[cursor], "expected '---' separator");
      ++cursor;
    }
    targets[f]->resize(dims[f], r);
    for (Index row = 0; row < dims[f]; ++row, ++cursor) {
      const auto toks = detail::split_ws(lines.text[cursor]);
      if (static_cast<Index>(toks.size()) != r)
        throw ParseError(lines.number[cursor],
                         "expected " + std::to_string(r) + " values, found " + std::to_string(toks.size()));
      for (Index c = 0; c < r; ++c) {
        const double v = detail::parse_double(toks[c], lines.number[cursor]);
        if (v < 0.0) throw ParseError(lines.number[cursor], "negative factor entry " + std::string(toks[c]));
        (*targets[f])(row, c) = v;
      }
    }
  }
  return model;
}

/// Writes a CPM stream at 17 significant digits (exact round trip).
inline void write_cpm(std::ostream& out, const CPModel& model) {
  model.check_consistent();
  out << "cpm " << model.n() << ' ' << model.m() << ' ' << model.l() << ' ' << model.rank() << '\n';
  const Matrix* sources[3] = {&model.U, &model.V, &model.Q};
  for (int f = 0; f < 3; ++f) {
    if (f > 0) out << "---\n";
    for (Index row = 0; row < sources[f]->rows(); ++row) {
      for (Index c = 0; c < sources[f]->cols(); ++c) {
        if (c) out << ' ';
        out << detail::format_double((*sources[f])(row, c), 17);
      }
      out << '\n';
    }
  }
}

inline CPModel read_cpm(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_cpm(in);
}

inline void write_cpm(const CPModel& model, const std::string& path) {
  auto out = detail::open_output(path);
  write_cpm(out, model);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace ntftraffic
