#pragma once

/**
 * @file oracle.hpp
 * @brief Reference solutions for discrete transport problems: an exact
 *        transportation simplex and the 1D monotone rearrangement.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mkflow/cost.hpp"
#include "mkflow/error.hpp"
#include "mkflow/field_io.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

struct PlanEntry {
  std::size_t i;
  std::size_t j;
  double w;
};

/// Optimal coupling between the node masses w_i rho0_i and w_j rho1_j.
struct DiscretePlan {
  std::size_t sources = 0;
  std::size_t targets = 0;
  /// Nonzero entries, sorted by (i, j).
  std::vector<PlanEntry> entries;
  double cost = 0.0;
  /// LP dual potentials: u[i] + v[j] <= c(x_i - y_j), with equality on the
  /// support of the plan.
  std::vector<double> u;
  std::vector<double> v;
  std::size_t pivots = 0;

  [[nodiscard]] std::vector<double> row_sums() const {
    std::vector<double> s(sources, 0.0);
    for (const auto& e : entries) s[e.i] += e.w;
    return s;
  }
  [[nodiscard]] std::vector<double> col_sums() const {
    std::vector<double> s(targets, 0.0);
    for (const auto& e : entries) s[e.j] += e.w;
    return s;
  }
};

namespace detail {

/// Transportation simplex on a dense cost matrix. Basic cells form a spanning
/// tree of the bipartite row/column graph; degenerate zero-flow cells stay in
/// the basis. Entering and leaving cells are chosen by Bland's rule (lowest
/// flat index), which rules out cycling.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
      : m_(supply.size()), n_(demand.size()), supply_(std::move(supply)), demand_(std::move(demand)),
        cost_(std::move(cost)), u_(m_), v_(n_) {}

  void solve(std::size_t max_pivots) {
    northwest_corner();
    double scale = 0.0;
    for (double c : cost_) scale = std::max(scale, std::abs(c));
    const double tol = 1e-12 * std::max(scale, 1.0);
    for (;;) {
      compute_duals();
      std::size_t enter = npos;
      for (std::size_t c = 0; c < m_ * n_; ++c) {
        if (in_basis_[c]) continue;
        if (cost_[c] - u_[c / n_] - v_[c % n_] < -tol) {
          enter = c;
          break;
        }
      }
      if (enter == npos) break;
      if (pivots_ == max_pivots) throw Error("transportation simplex exceeded pivot limit");
      pivot(enter);
      ++pivots_;
    }
  }

  [[nodiscard]] double flow(std::size_t c) const { return flow_[c]; }
  [[nodiscard]] bool basic(std::size_t c) const { return in_basis_[c] != 0; }
  [[nodiscard]] const std::vector<double>& u() const { return u_; }
  [[nodiscard]] const std::vector<double>& v() const { return v_; }
  [[nodiscard]] std::size_t pivots() const { return pivots_; }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  void northwest_corner() {
    flow_.assign(m_ * n_, 0.0);
    in_basis_.assign(m_ * n_, 0);
    basis_.clear();
    std::vector<double> s = supply_, d = demand_;
    std::size_t i = 0, j = 0;
    while (i < m_ && j < n_) {
      const double x = std::min(s[i], d[j]);
      add_basic(i * n_ + j, x);
      s[i] -= x;
      d[j] -= x;
      if (i + 1 == m_) {
        ++j;
      } else if (j + 1 == n_) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void add_basic(std::size_t c, double x) {
    flow_[c] = x;
    in_basis_[c] = 1;
    basis_.push_back(c);
  }

  // Tree adjacency: rows are vertices 0..m-1, columns m..m+n-1.
  [[nodiscard]] std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(m_ + n_);
    for (std::size_t c : basis_) {
      adj[c / n_].push_back(c);
      adj[m_ + c % n_].push_back(c);
    }
    return adj;
  }

  void compute_duals() {
    const auto adj = adjacency();
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    u_[0] = 0.0;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t c : adj[node]) {
        const std::size_t r = c / n_;
        const std::size_t col = m_ + c % n_;
        const std::size_t other = node == r ? col : r;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= m_) {
          v_[other - m_] = cost_[c] - u_[r];
        } else {
          u_[other] = cost_[c] - v_[col - m_];
        }
        queue.push_back(other);
      }
    }
  }

  void pivot(std::size_t enter) {
    // Path in the tree from the entering column back to the entering row.
    const auto adj = adjacency();
    const std::size_t start = m_ + enter % n_;
    const std::size_t goal = enter / n_;
    std::vector<std::size_t> via(m_ + n_, npos);
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty() && !seen[goal]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t c : adj[node]) {
        const std::size_t r = c / n_;
        const std::size_t col = m_ + c % n_;
        const std::size_t other = node == r ? col : r;
        if (seen[other]) continue;
        seen[other] = 1;
        via[other] = c;
        queue.push_back(other);
      }
    }
    // Walking from goal back to start: the first cell leaves the row of the
    // entering cell and must decrease; signs alternate from there.
    std::vector<std::size_t> minus, plus;
    std::size_t node = goal;
    bool decrease = true;
    while (node != start) {
      const std::size_t c = via[node];
      (decrease ? minus : plus).push_back(c);
      const std::size_t r = c / n_;
      const std::size_t col = m_ + c % n_;
      node = node == r ? col : r;
      decrease = !decrease;
    }
    std::size_t leave = npos;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t c : minus) {
      if (flow_[c] < theta || (flow_[c] == theta && c < leave)) {
        theta = flow_[c];
        leave = c;
      }
    }
    for (std::size_t c : minus) flow_[c] -= theta;
    for (std::size_t c : plus) flow_[c] += theta;
    flow_[leave] = 0.0;
    in_basis_[leave] = 0;
    std::replace(basis_.begin(), basis_.end(), leave, enter);
    flow_[enter] = theta;
    in_basis_[enter] = 1;
  }

  std::size_t m_, n_;
  std::vector<double> supply_, demand_, cost_;
  std::vector<double> flow_;
  std::vector<std::uint8_t> in_basis_;
  std::vector<std::size_t> basis_;
  std::vector<double> u_, v_;
  std::size_t pivots_ = 0;
};

}  // namespace detail

inline constexpr std::size_t kLpCellLimit = 10'000'000;

/**
 * Exact discrete optimal transport between the node masses of two densities
 * on their grids. Nodes without mass are dropped from the LP; their dual
 * values are filled in as the c-transform of the other side, which keeps
 * u_i + v_j <= c_ij everywhere.
 */
inline DiscretePlan lp_transport(const DensityField& rho0, const DensityField& rho1, const CostFunction& cost,
                                 std::size_t max_pivots = 10'000'000) {
  const Grid& g0 = rho0.grid();
  const Grid& g1 = rho1.grid();
  if (g0.dim() != g1.dim()) throw DimensionMismatch("lp_transport: densities have different dimensions");
  if (g0.size() * g1.size() > kLpCellLimit) {
    throw InvalidArgument("lp_transport: " + std::to_string(g0.size()) + " x " + std::to_string(g1.size()) +
                          " exceeds the cell limit");
  }
  std::vector<std::size_t> rows, cols;
  std::vector<double> supply, demand;
  double total0 = 0.0, total1 = 0.0;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    const double m = g0.weight(i) * rho0[i];
    total0 += m;
    if (m > 0.0) {
      rows.push_back(i);
      supply.push_back(m);
    }
  }
  for (std::size_t j = 0; j < g1.size(); ++j) {
    const double m = g1.weight(j) * rho1[j];
    total1 += m;
    if (m > 0.0) {
      cols.push_back(j);
      demand.push_back(m);
    }
  }
  if (std::abs(total0 - total1) > 1e-9) {
    throw Infeasible("lp_transport: masses differ by " + format_real(total0 - total1));
  }
  // Absorb rounding so supply and demand balance exactly.
  const double fix = total0 / total1;
  for (double& d : demand) d *= fix;

  auto cell_cost = [&](std::size_t i, std::size_t j) {
    const Point x = g0.coord(i), y = g1.coord(j);
    return cost.eval({x[0] - y[0], x[1] - y[1]});
  };
  std::vector<double> c(rows.size() * cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) c[a * cols.size() + b] = cell_cost(rows[a], cols[b]);
  }
  detail::TransportationSimplex lp(supply, demand, c);
  lp.solve(max_pivots);

  DiscretePlan plan;
  plan.sources = g0.size();
  plan.targets = g1.size();
  plan.pivots = lp.pivots();
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) {
      const std::size_t cell = a * cols.size() + b;
      if (lp.basic(cell) && lp.flow(cell) > 0.0) {
        plan.entries.push_back({rows[a], cols[b], lp.flow(cell)});
        plan.cost += lp.flow(cell) * c[cell];
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  plan.u.assign(g0.size(), inf);
  plan.v.assign(g1.size(), inf);
  for (std::size_t a = 0; a < rows.size(); ++a) plan.u[rows[a]] = lp.u()[a];
  for (std::size_t b = 0; b < cols.size(); ++b) plan.v[cols[b]] = lp.v()[b];
  for (std::size_t j = 0; j < g1.size(); ++j) {
    if (plan.v[j] != inf) continue;
    for (std::size_t a = 0; a < rows.size(); ++a) plan.v[j] = std::min(plan.v[j], cell_cost(rows[a], j) - lp.u()[a]);
  }
  for (std::size_t i = 0; i < g0.size(); ++i) {
    if (plan.u[i] != inf) continue;
    for (std::size_t j = 0; j < g1.size(); ++j) plan.u[i] = std::min(plan.u[i], cell_cost(i, j) - plan.v[j]);
  }
  return plan;
}

/// Sparse `i j w` triples, one per line.
inline std::string format_plan(const DiscretePlan& plan) {
  std::string out;
  for (const auto& e : plan.entries) {
    out += std::to_string(e.i) + " " + std::to_string(e.j) + " " + format_real(e.w) + "\n";
  }
  return out;
}

struct QuantileMap {
  /// M(x_i) at every node.
  std::vector<double> map;
  double cost = 0.0;
};

namespace detail {

inline std::vector<double> cumulative_trapezoid(const DensityField& rho) {
  const Grid& g = rho.grid();
  std::vector<double> F(g.size(), 0.0);
  const double h = g.h(0);
  for (std::size_t i = 1; i < g.size(); ++i) F[i] = F[i - 1] + 0.5 * h * (rho[i - 1] + rho[i]);
  const double total = F.back();
  for (double& f : F) f /= total;
  return F;
}

/// Generalised inverse of a nondecreasing piecewise-linear CDF.
inline double inverse_cdf(const std::vector<double>& F, const Grid& g, double s) {
  const std::size_t n = F.size();
  if (s <= 0.0) {
    const auto it = std::upper_bound(F.begin(), F.end(), 0.0);
    return g.axis(0).coord(it == F.begin() ? 0 : static_cast<std::size_t>(it - F.begin()) - 1);
  }
  if (s >= 1.0) {
    const auto it = std::lower_bound(F.begin(), F.end(), 1.0);
    return g.axis(0).coord(it == F.end() ? n - 1 : static_cast<std::size_t>(it - F.begin()));
  }
  // First j with F[j + 1] > s; then F[j] <= s < F[j + 1].
  const auto it = std::upper_bound(F.begin(), F.end(), s);
  const std::size_t j1 = static_cast<std::size_t>(it - F.begin());
  const std::size_t j = j1 - 1;
  const double t = (s - F[j]) / (F[j1] - F[j]);
  return g.axis(0).coord(j) + t * g.h(0);
}

}  // namespace detail

/// 1D monotone rearrangement M = F1^{-1} o F0, optimal for every convex cost.
inline QuantileMap quantile_map_1d(const DensityField& rho0, const DensityField& rho1, const CostFunction& cost) {
  const Grid& g0 = rho0.grid();
  const Grid& g1 = rho1.grid();
  if (g0.dim() != 1 || g1.dim() != 1) throw DimensionError("quantile_map_1d requires one-dimensional densities");
  const auto F0 = detail::cumulative_trapezoid(rho0);
  const auto F1 = detail::cumulative_trapezoid(rho1);
  QuantileMap out;
  out.map.resize(g0.size());
  for (std::size_t i = 0; i < g0.size(); ++i) {
    out.map[i] = detail::inverse_cdf(F1, g1, F0[i]);
    const double d = g0.axis(0).coord(i) - out.map[i];
    out.cost += g0.weight(i) * rho0[i] * cost.eval({d, 0.0});
  }
  return out;
}

/// Kantorovich potential of a 1D map: u' = Dc(x - M(x)), integrated by the
/// trapezoid rule with u = 0 at the left end.
inline ScalarField quantile_potential_1d(const QuantileMap& qm, const Grid& g, const CostFunction& cost) {
  if (g.dim() != 1) throw DimensionError("quantile_potential_1d requires a one-dimensional grid");
  std::vector<double> slope(g.size()), u(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) slope[i] = cost.grad({g.axis(0).coord(i) - qm.map[i], 0.0})[0];
  for (std::size_t i = 1; i < g.size(); ++i) u[i] = u[i - 1] + 0.5 * g.h(0) * (slope[i - 1] + slope[i]);
  return {g, std::move(u)};
}

}  // namespace mkflow
