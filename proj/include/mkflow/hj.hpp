#pragma once

/**
 * @file hj.hpp
 * @brief Viscosity solution of phi_t + c*(grad phi) = 0, phi(1, .) = v.
 *
 * Each time level is evaluated directly from the Lax-Hopf representation
 *
 *   phi(t, x) = max over nodes y of  v(y) - (1 - t) c((x - y) / (1 - t)),
 *
 * with no time marching. At t = 1 the formula degenerates and the snapshot is
 * v itself.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mkflow/cost.hpp"
#include "mkflow/ctransform.hpp"
#include "mkflow/field_io.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

/// nt + 1 equispaced levels on [0, 1].
class TimeGrid {
 public:
  explicit TimeGrid(std::size_t steps = 1) : steps_(steps) {
    if (steps == 0) throw InvalidArgument("time grid needs at least one step");
  }

  [[nodiscard]] std::size_t steps() const { return steps_; }
  [[nodiscard]] double dt() const { return 1.0 / static_cast<double>(steps_); }
  [[nodiscard]] double time(std::size_t k) const {
    return k == steps_ ? 1.0 : static_cast<double>(k) / static_cast<double>(steps_);
  }
  /// Remaining time 1 - t_k, computed from integers so it is exactly 1 at k = 0.
  [[nodiscard]] double remaining(std::size_t k) const {
    return static_cast<double>(steps_ - k) / static_cast<double>(steps_);
  }
  [[nodiscard]] std::vector<double> times() const {
    std::vector<double> t(steps_ + 1);
    for (std::size_t k = 0; k <= steps_; ++k) t[k] = time(k);
    return t;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::size_t steps_;
};

struct PotentialTrajectory {
  TimeGrid time_grid;
  /// phi(t_k, .) for k = 0..nt; the last entry is the terminal data v.
  std::vector<ScalarField> snapshots;
  /// Lowest-index maximiser y of each Lax-Hopf evaluation (identity at t = 1).
  std::vector<std::vector<std::size_t>> maximizers;
  std::vector<std::vector<std::uint8_t>> boundary_attained;

  [[nodiscard]] const ScalarField& terminal() const { return snapshots.back(); }
  [[nodiscard]] const Grid& grid() const { return snapshots.front().grid(); }
};

inline PotentialTrajectory lax_hopf_solve(const ScalarField& v, const CostFunction& cost, const TimeGrid& tg) {
  const Grid& g = v.grid();
  PotentialTrajectory traj{tg, {}, {}, {}};
  traj.snapshots.reserve(tg.steps() + 1);
  for (std::size_t k = 0; k < tg.steps(); ++k) {
    const detail::OffsetCostTable table(g, cost, tg.remaining(k));
    std::vector<double> phi(g.size());
    std::vector<std::size_t> arg(g.size());
    detail::sup_convolution(v.values(), g, table, phi, arg);
    std::vector<std::uint8_t> boundary(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) boundary[i] = g.on_boundary(arg[i]) ? 1 : 0;
    traj.snapshots.emplace_back(g, std::move(phi));
    traj.maximizers.push_back(std::move(arg));
    traj.boundary_attained.push_back(std::move(boundary));
  }
  traj.snapshots.push_back(v);
  std::vector<std::size_t> self(g.size());
  for (std::size_t i = 0; i < self.size(); ++i) self[i] = i;
  traj.maximizers.push_back(std::move(self));
  std::vector<std::uint8_t> boundary(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) boundary[i] = g.on_boundary(i) ? 1 : 0;
  traj.boundary_attained.push_back(std::move(boundary));
  return traj;
}

/// phi(0, .); the dual partner of v is u = -phi(0, .).
inline const ScalarField& initial_potential(const PotentialTrajectory& traj) { return traj.snapshots.front(); }

/// Feedback velocity Dc*(grad phi(t_k)), optionally after triangular
/// mollification of phi with half-width `mollify_width`.
inline VectorField velocity(const PotentialTrajectory& traj, std::size_t k, const CostFunction& cost,
                            double mollify_width = 0.0) {
  if (k > traj.time_grid.steps()) throw InvalidArgument("time index out of range");
  const ScalarField& phi = traj.snapshots[k];
  const VectorField grad = gradient(mollify_width > 0.0 ? mollify(phi, mollify_width) : phi);
  if (cost.quadratic()) return grad;
  const Grid& g = phi.grid();
  std::array<std::vector<double>, 2> comps{std::vector<double>(g.size()), std::vector<double>(g.size())};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point vel = cost.conj_grad(grad.at(i));
    comps[0][i] = vel[0];
    comps[1][i] = vel[1];
  }
  return {g, std::move(comps)};
}

/**
 * Discrete L1 residual of phi_t + c*(grad phi) over space-time, using the
 * forward difference in time and the gradient of the average of adjacent
 * snapshots. Only nodes whose 3-point stencil is interior and whose Lax-Hopf
 * maximisers avoid the box boundary at both levels contribute; elsewhere
 * the truncated sup is not the viscosity solution on R^d.
 */
inline double hj_residual(const PotentialTrajectory& traj, const CostFunction& cost) {
  const TimeGrid& tg = traj.time_grid;
  if (tg.steps() < 2) throw InvalidArgument("hj_residual needs at least two time steps");
  const Grid& g = traj.grid();
  const double dt = tg.dt();
  double total = 0.0;
  for (std::size_t k = 0; k < tg.steps(); ++k) {
    const auto& a = traj.snapshots[k];
    const auto& b = traj.snapshots[k + 1];
    std::vector<double> mid(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
    const VectorField grad = gradient(ScalarField(g, std::move(mid)));
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.on_boundary(i)) continue;
      bool trusted = true;
      for (int ax = 0; ax < g.dim() && trusted; ++ax) {
        const std::size_t st = g.stride(ax);
        for (std::size_t node : {i - st, i, i + st}) {
          if (traj.boundary_attained[k][node] || (k + 1 < tg.steps() && traj.boundary_attained[k + 1][node])) {
            trusted = false;
            break;
          }
        }
      }
      if (!trusted) continue;
      const double r = (b[i] - a[i]) / dt + cost.conj_eval(grad.at(i));
      total += dt * g.weight(i) * std::abs(r);
    }
  }
  return total;
}

/// Checks f(x + z) - 2 f(x) + f(x - z) >= -C |z|^2 for z one grid step along
/// each axis at every interior node. A relative slack of a few ulps absorbs
/// rounding in the second difference.
inline bool semiconvexity_check(const ScalarField& f, double C) {
  const Grid& g = f.grid();
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t n = g.n(a);
    const std::size_t st = g.stride(a);
    const double h = g.h(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::size_t i = g.multi_index(k)[static_cast<std::size_t>(a)];
      if (i == 0 || i + 1 == n) continue;
      const double fp = f[k + st], f0 = f[k], fm = f[k - st];
      const double second = fp - 2.0 * f0 + fm;
      const double slack = 1e-12 * (std::abs(fp) + 2.0 * std::abs(f0) + std::abs(fm));
      if (second < -C * h * h - slack) return false;
    }
  }
  return true;
}

/// Largest forward-difference slope over all axes (discrete Lipschitz constant).
inline double lipschitz_constant(const ScalarField& f) {
  const Grid& g = f.grid();
  double lip = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t st = g.stride(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.multi_index(k)[static_cast<std::size_t>(a)] + 1 == g.n(a)) continue;
      lip = std::max(lip, std::abs(f[k + st] - f[k]) / g.h(a));
    }
  }
  return lip;
}

/// max(|f|_inf, Lip(f)), the discrete W^{1,inf} norm.
inline double w1inf_norm(const ScalarField& f) {
  double sup = 0.0;
  for (double x : f.values()) sup = std::max(sup, std::abs(x));
  return std::max(sup, lipschitz_constant(f));
}

/// Writes `<stem>_<k>.field` per snapshot and `<stem>.manifest` listing the
/// times on one line followed by the file names.
inline void write_trajectory(const std::vector<ScalarField>& snapshots, const TimeGrid& tg,
                             const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::string manifest = "times:";
  for (double t : tg.times()) manifest += " " + format_real(t);
  manifest += "\n";
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    const std::string name = stem + "_" + std::to_string(k) + ".field";
    write_field(snapshots[k], dir / name);
    manifest += name + "\n";
  }
  write_text(dir / (stem + ".manifest"), manifest);
}

}  // namespace mkflow
