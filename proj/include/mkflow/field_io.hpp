#pragma once

// Text `.field` format:
//
//   field <dim>
//   <min> <max> <n>          (one line per axis)
//   <values...>              (row-major, one axis-0 slice per line)
//
// Reals are written with 17 significant digits, which round-trips doubles
// exactly.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mkflow/error.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x + 0.0);  // no "-0"
  return buf;
}

inline std::string format_field(const ScalarField& f) {
  const Grid& g = f.grid();
  std::string out = "field " + std::to_string(g.dim()) + "\n";
  for (int a = 0; a < g.dim(); ++a) {
    out += format_real(g.axis(a).min) + " " + format_real(g.axis(a).max) + " " + std::to_string(g.n(a)) + "\n";
  }
  const std::size_t row = g.dim() == 2 ? g.n(1) : 1;
  for (std::size_t k = 0; k < f.size(); ++k) {
    out += format_real(f[k]);
    out += (k + 1) % row == 0 ? '\n' : ' ';
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("not a number: '" + std::string(tok) + "'", line);
  }
  return v;
}

inline std::size_t parse_count(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("not a node count: '" + std::string(tok) + "'", line);
  }
  return v;
}

}  // namespace detail

inline ScalarField parse_field(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw ParseError("empty field file", 1);

  const auto header = detail::split_ws(lines[0]);
  if (header.size() != 2 || header[0] != "field") throw ParseError("expected 'field <dim>'", 1);
  const std::size_t dim = detail::parse_count(header[1], 1);
  if (dim != 1 && dim != 2) throw ParseError("dimension must be 1 or 2", 1);
  if (lines.size() < 1 + dim) throw ParseError("missing axis lines", lines.size());

  std::vector<AxisSpec> axes;
  for (std::size_t a = 0; a < dim; ++a) {
    const std::size_t ln = a + 2;
    const auto tok = detail::split_ws(lines[a + 1]);
    if (tok.size() != 3) throw ParseError("expected '<min> <max> <n>'", ln);
    AxisSpec ax{detail::parse_real(tok[0], ln), detail::parse_real(tok[1], ln), detail::parse_count(tok[2], ln)};
    if (!(ax.max > ax.min) || ax.n < 2) throw ParseError("invalid axis specification", ln);
    axes.push_back(ax);
  }
  const Grid grid = Grid::from_axes(axes);

  std::vector<double> values;
  values.reserve(grid.size());
  for (std::size_t li = 1 + dim; li < lines.size(); ++li) {
    for (auto tok : detail::split_ws(lines[li])) {
      const double v = detail::parse_real(tok, li + 1);
      if (!std::isfinite(v)) throw ParseError("non-finite value", li + 1);
      if (values.size() == grid.size()) {
        throw DimensionMismatch("more values than the " + std::to_string(grid.size()) + " grid nodes (line " +
                                std::to_string(li + 1) + ")");
      }
      values.push_back(v);
    }
  }
  if (values.size() != grid.size()) {
    throw DimensionMismatch("expected " + std::to_string(grid.size()) + " values, found " +
                            std::to_string(values.size()));
  }
  return {grid, std::move(values)};
}

inline ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_field(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), path.string());
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline void write_field(const ScalarField& f, const std::filesystem::path& path) {
  write_text(path, format_field(f));
}

}  // namespace mkflow
