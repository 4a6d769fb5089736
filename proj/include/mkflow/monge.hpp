#pragma once

/**
 * @file monge.hpp
 * @brief Static transport map M(x) = x - Dc*(grad u)(x) recovered from a dual
 *        potential, with cost, pushforward and Monge-Ampere diagnostics.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mkflow/cost.hpp"
#include "mkflow/field_io.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

struct MongeMap {
  Grid grid;
  VectorField target;
  /// x - M(x), kept unclipped so that map_cost sees the raw displacement.
  VectorField displacement;
  /// Targets that fell outside the box and were clipped in `target`.
  std::size_t clip_count = 0;
};

inline MongeMap map_from_potential(const ScalarField& u_bar, const CostFunction& cost, double mollify_width = 0.0) {
  const Grid& g = u_bar.grid();
  const VectorField grad = gradient(mollify_width > 0.0 ? mollify(u_bar, mollify_width) : u_bar);
  std::array<std::vector<double>, 2> disp{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  std::array<std::vector<double>, 2> tgt{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  std::size_t clips = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point d = cost.quadratic() ? grad.at(k) : cost.conj_grad(grad.at(k));
    const Point x = g.coord(k);
    Point m{x[0] - d[0], x[1] - d[1]};
    if (g.dim() == 1) m[1] = 0.0;
    if (g.clamp(m)) ++clips;
    for (std::size_t a = 0; a < 2; ++a) {
      disp[a][k] = d[a];
      tgt[a][k] = m[a];
    }
  }
  return {g, VectorField(g, std::move(tgt)), VectorField(g, std::move(disp)), clips};
}

/// Integral of c(x - M(x)) rho0(x).
inline double map_cost(const MongeMap& m, const DensityField& rho0, const CostFunction& cost) {
  const Grid& g = rho0.grid();
  require_same_grid(g, m.grid, "map_cost");
  double total = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (rho0[k] == 0.0) continue;
    total += g.weight(k) * rho0[k] * cost.eval(m.displacement.at(k));
  }
  return total;
}

namespace detail {

/// Overlap fractions of [a, b] with the control cells of one axis, as
/// (first node, fractions...). A degenerate interval goes to one cell.
inline std::size_t cell_overlaps(const AxisSpec& ax, double a, double b, std::vector<double>& frac) {
  frac.clear();
  const double h = ax.spacing();
  auto cell_lo = [&](std::size_t j) { return j == 0 ? ax.min : ax.coord(j) - 0.5 * h; };
  auto cell_hi = [&](std::size_t j) { return j + 1 == ax.n ? ax.max : ax.coord(j) + 0.5 * h; };
  auto locate = [&](double x) {
    const double s = std::round((x - ax.min) / h);
    return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(ax.n - 1)));
  };
  if (!(b > a)) {
    frac.push_back(1.0);
    return locate(a);
  }
  std::size_t first = locate(a);
  while (first > 0 && cell_lo(first) > a) --first;
  while (first + 1 < ax.n && cell_hi(first) <= a) ++first;
  for (std::size_t j = first; j < ax.n; ++j) {
    const double lo = std::max(a, cell_lo(j));
    const double hi = std::min(b, cell_hi(j));
    frac.push_back(std::max(hi - lo, 0.0) / (b - a));
    if (cell_hi(j) >= b) break;
  }
  return first;
}

}  // namespace detail

/**
 * Image of rho0 under M by area-weighted deposition. The control cell of
 * each node is mapped to a box centred at M(x) whose extent along each axis
 * is the cell extent times the local stretch |dM_a/dx_a| (central
 * differences); its mass is shared among the target control cells in
 * proportion to overlap. Boxes are clipped to the domain. The identity map
 * reproduces rho0 and a uniform stretch produces no aliasing.
 */
inline DensityField pushforward(const MongeMap& m, const DensityField& rho0) {
  const Grid& g = rho0.grid();
  require_same_grid(g, m.grid, "pushforward");
  std::vector<double> mass(g.size(), 0.0);
  std::array<std::vector<double>, 2> frac;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (rho0[k] == 0.0) continue;
    const auto idx = g.multi_index(k);
    std::array<std::size_t, 2> first{idx[0], 0};
    frac[1].assign(1, 1.0);
    for (int a = 0; a < g.dim(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const AxisSpec& ax = g.axis(a);
      const std::size_t i = idx[ua];
      const std::size_t st = g.stride(a);
      const auto comp = m.target.component(a);
      const std::size_t lo_k = i > 0 ? k - st : k;
      const std::size_t hi_k = i + 1 < ax.n ? k + st : k;
      const double span = ax.coord(i + 1 < ax.n ? i + 1 : i) - ax.coord(i > 0 ? i - 1 : i);
      const double stretch = std::abs(comp[hi_k] - comp[lo_k]) / span;
      const double h = ax.spacing();
      double a_lo = comp[k] - stretch * (i > 0 ? 0.5 * h : 0.0);
      double a_hi = comp[k] + stretch * (i + 1 < ax.n ? 0.5 * h : 0.0);
      a_lo = std::clamp(a_lo, ax.min, ax.max);
      a_hi = std::clamp(a_hi, ax.min, ax.max);
      first[ua] = detail::cell_overlaps(ax, a_lo, a_hi, frac[ua]);
    }
    const double total = g.weight(k) * rho0[k];
    for (std::size_t p0 = 0; p0 < frac[0].size(); ++p0) {
      for (std::size_t p1 = 0; p1 < frac[1].size(); ++p1) {
        const std::size_t target = g.dim() == 2 ? g.index(first[0] + p0, first[1] + p1) : first[0] + p0;
        mass[target] += total * frac[0][p0] * frac[1][p1];
      }
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) mass[k] /= g.weight(k);
  return normalize(ScalarField(g, std::move(mass)));
}

/// L1 distance between the pushforward of rho0 under M and rho1.
inline double pushforward_error(const MongeMap& m, const DensityField& rho0, const DensityField& rho1) {
  require_same_grid(rho0.grid(), rho1.grid(), "pushforward_error");
  const DensityField image = pushforward(m, rho0);
  return l1_distance(image.values(), rho1.values(), rho0.grid());
}

/**
 * Interior L1 norm of det(D^2 psi) rho1(grad psi) - rho0 with
 * psi = |x|^2/2 - u, for the quadratic cost. Hessian by centred second
 * differences; rho1 is interpolated and taken as zero outside the box.
 * Nodes within `margin` of the boundary (in grid steps, at least 1) are
 * excluded.
 */
inline double monge_ampere_residual(const ScalarField& u_bar, const DensityField& rho0, const DensityField& rho1,
                                    double mollify_width = 0.0, std::size_t margin = 1) {
  const Grid& g = u_bar.grid();
  require_same_grid(g, rho0.grid(), "monge_ampere_residual");
  require_same_grid(g, rho1.grid(), "monge_ampere_residual");
  for (int a = 0; a < g.dim(); ++a) {
    if (g.n(a) < 5) throw InvalidArgument("monge_ampere_residual needs at least 5 nodes per axis");
  }
  margin = std::max<std::size_t>(margin, 1);
  const ScalarField u = mollify_width > 0.0 ? mollify(u_bar, mollify_width) : u_bar;
  std::vector<double> psi(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.coord(k);
    psi[k] = 0.5 * dot(x, x) - u[k];
  }
  const ScalarField psi_field(g, psi);
  const VectorField grad = gradient(psi_field);

  double total = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto idx = g.multi_index(k);
    bool interior = true;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t i = idx[static_cast<std::size_t>(a)];
      if (i < margin || i + margin >= g.n(a)) interior = false;
    }
    if (!interior) continue;
    double det;
    const std::size_t s0 = g.stride(0);
    const double h0 = g.h(0);
    const double d00 = (psi[k + s0] - 2.0 * psi[k] + psi[k - s0]) / (h0 * h0);
    if (g.dim() == 1) {
      det = d00;
    } else {
      const double h1 = g.h(1);
      const double d11 = (psi[k + 1] - 2.0 * psi[k] + psi[k - 1]) / (h1 * h1);
      const double d01 = (psi[k + s0 + 1] - psi[k + s0 - 1] - psi[k - s0 + 1] + psi[k - s0 - 1]) / (4.0 * h0 * h1);
      det = d00 * d11 - d01 * d01;
    }
    const double target = interpolate(rho1.values(), g, grad.at(k), Outside::Zero);
    total += g.weight(k) * std::abs(det * target - rho0[k]);
  }
  return total;
}

/// Writes one `.field` file per component of M: `<stem>_0.field`, ...
inline void write_map(const MongeMap& m, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  for (int a = 0; a < m.grid.dim(); ++a) {
    write_field(m.target.component_field(a), dir / (stem + "_" + std::to_string(a) + ".field"));
  }
}

}  // namespace mkflow
