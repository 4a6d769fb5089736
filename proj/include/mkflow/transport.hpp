#pragma once

/**
 * @file transport.hpp
 * @brief Continuity equation lambda_t + div(V lambda) = eps * Laplace(lambda)
 *        driven by the feedback velocity V = Dc*(grad phi), plus Lagrangian
 *        characteristics and the kinetic action of a flow.
 *
 * Finite volumes on the node-centred grid: node k owns a cell whose size is
 * its trapezoid weight, so the discrete mass sum_k w_k lambda_k is exactly
 * the trapezoid integral and changes only through boundary fluxes. Face
 * velocities come from compact differences of phi across each face.
 *
 * Two flux reconstructions are available. `Upwind` is the first-order donor
 * cell scheme. `Muscl` adds monotonised-central limited slopes with a
 * two-stage SSP Runge-Kutta step; it keeps positivity and exact local
 * conservation and is second order away from extrema. Both substep each time
 * interval so that no cell can lose more than `cfl` of its content per stage.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkflow/cost.hpp"
#include "mkflow/grid.hpp"
#include "mkflow/hj.hpp"

namespace mkflow {

enum class AdvectionScheme { Upwind, Muscl };

enum class BoundaryCondition {
  NoFlux,   ///< zero flux through the box faces
  Outflow,  ///< mass leaves through faces where the velocity points outward
};

struct AdvectOptions {
  double eps = 0.0;
  /// When set, eps is replaced by kappa * h (smallest spacing), so the
  /// viscosity vanishes under refinement.
  bool grid_viscosity = false;
  double kappa = 0.5;
  AdvectionScheme scheme = AdvectionScheme::Muscl;
  BoundaryCondition boundary = BoundaryCondition::NoFlux;
  /// Largest fraction of a cell's content that may leave it in one stage.
  double cfl = 0.9;
  std::size_t max_substeps = 1'000'000;
  double mollify_width = 0.0;
  /// Faces where |grad phi| is below this while adjacent density exceeds
  /// `mass_floor` are counted as low-gradient events (relevant for p > 2,
  /// where Dc* is not differentiable at the origin).
  double gradient_floor = 1e-8;
  double mass_floor = 1e-6;
};

struct DensityTrajectory {
  TimeGrid time_grid;
  std::vector<ScalarField> snapshots;
  std::vector<double> masses;
  /// Cumulative mass that has left through the boundary up to each level.
  std::vector<double> outflux;
  /// max over steps of |m_{k+1} - m_k + outflux during step k|.
  double max_step_drift = 0.0;
  double min_value = 0.0;
  bool l1_nonincreasing = true;
  std::size_t substeps = 0;
  /// Rounding-level negative values reset to zero.
  std::size_t clamped = 0;
  std::size_t low_gradient_events = 0;

  [[nodiscard]] const ScalarField& final() const { return snapshots.back(); }
};

namespace detail {

/// Velocities normal to the faces of every cell. faces[a][k] is the velocity
/// across the face between node k and node k + stride(a) (unused when k is
/// the last node along a); edge[a][k] is the nodal normal velocity used on
/// box faces. gnorm[a][k] is |grad phi| at the interior face.
struct FaceVelocities {
  std::array<std::vector<double>, 2> faces;
  std::array<std::vector<double>, 2> edge;
  std::array<std::vector<double>, 2> gnorm;
};

inline FaceVelocities face_velocities(const ScalarField& phi_in, const CostFunction& cost, double mollify_width) {
  const ScalarField phi = mollify_width > 0.0 ? mollify(phi_in, mollify_width) : phi_in;
  const Grid& g = phi.grid();
  const VectorField nodal = gradient(phi);
  FaceVelocities fv;
  for (int a = 0; a < g.dim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const std::size_t st = g.stride(a);
    const double h = g.h(a);
    auto& faces = fv.faces[ua];
    auto& gn = fv.gnorm[ua];
    auto& edge = fv.edge[ua];
    faces.assign(g.size(), 0.0);
    gn.assign(g.size(), 0.0);
    edge.assign(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const bool last = g.multi_index(k)[ua] + 1 == g.n(a);
      const Point vel_node = cost.conj_grad(nodal.at(k));
      edge[k] = vel_node[ua];
      if (last) continue;
      Point grad{0.0, 0.0};
      grad[ua] = (phi[k + st] - phi[k]) / h;
      if (g.dim() == 2) {
        const std::size_t other = 1 - ua;
        grad[other] = 0.5 * (nodal.component(static_cast<int>(other))[k] +
                             nodal.component(static_cast<int>(other))[k + st]);
      }
      faces[k] = cost.conj_grad(grad)[ua];
      gn[k] = norm(grad);
    }
  }
  return fv;
}

inline double mc_slope(double left, double right) {
  if (left * right <= 0.0) return 0.0;
  const double s = left > 0.0 ? 1.0 : -1.0;
  return s * std::min({2.0 * std::abs(left), 2.0 * std::abs(right), 0.5 * std::abs(left + right)});
}

class FluxStepper {
 public:
  FluxStepper(const Grid& g, const AdvectOptions& opts) : g_(g), opts_(opts), slopes_(g.size()) {}

  /// Positivity bound: largest per-cell outflow rate (per unit time) under
  /// the given face velocities, including diffusion.
  [[nodiscard]] double outflow_rate(const FaceVelocities& fv) const {
    const double factor = opts_.scheme == AdvectionScheme::Muscl ? 2.0 : 1.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < g_.size(); ++k) {
      const auto idx = g_.multi_index(k);
      double rate = 0.0;
      for (int a = 0; a < g_.dim(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const std::size_t i = idx[ua];
        const std::size_t n = g_.n(a);
        const std::size_t st = g_.stride(a);
        const double w = g_.axis(a).weight(i);
        double out_right = 0.0;
        double out_left = 0.0;
        if (i + 1 < n) {
          out_right = std::max(fv.faces[ua][k], 0.0);
        } else if (opts_.boundary == BoundaryCondition::Outflow) {
          out_right = std::max(fv.edge[ua][k], 0.0);
        }
        if (i > 0) {
          out_left = std::max(-fv.faces[ua][k - st], 0.0);
        } else if (opts_.boundary == BoundaryCondition::Outflow) {
          out_left = std::max(-fv.edge[ua][k], 0.0);
        }
        const double adv = opts_.scheme == AdvectionScheme::Muscl ? factor * std::max(out_left, out_right)
                                                                  : out_left + out_right;
        const double faces = static_cast<double>((i > 0) + (i + 1 < n));
        rate += adv / w + opts_.eps * faces / (g_.h(a) * w);
      }
      worst = std::max(worst, rate);
    }
    return worst;
  }

  /// d(lambda)/dt into `rhs`; returns the boundary outflux rate.
  double rhs(const std::vector<double>& lam, const FaceVelocities& fv, std::vector<double>& rhs) {
    std::fill(rhs.begin(), rhs.end(), 0.0);
    double outflux = 0.0;
    for (int a = 0; a < g_.dim(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const std::size_t n = g_.n(a);
      const std::size_t st = g_.stride(a);
      const double h = g_.h(a);
      const bool muscl = opts_.scheme == AdvectionScheme::Muscl;
      if (muscl) {
        for (std::size_t k = 0; k < g_.size(); ++k) {
          const std::size_t i = g_.multi_index(k)[ua];
          slopes_[k] = (i == 0 || i + 1 == n) ? 0.0 : mc_slope(lam[k] - lam[k - st], lam[k + st] - lam[k]);
        }
      }
      // Face area over cell size reduces to 1 / w_a(i): the transverse
      // trapezoid weight cancels.
      for (std::size_t k = 0; k < g_.size(); ++k) {
        const std::size_t i = g_.multi_index(k)[ua];
        const double w_here = g_.axis(a).weight(i);
        const double transverse = g_.weight(k) / w_here;
        if (i + 1 < n) {
          const std::size_t j = k + st;
          const double v = fv.faces[ua][k];
          double flux;
          if (v > 0.0) {
            flux = v * (muscl ? lam[k] + 0.5 * slopes_[k] : lam[k]);
          } else {
            flux = v * (muscl ? lam[j] - 0.5 * slopes_[j] : lam[j]);
          }
          if (opts_.eps > 0.0) flux -= opts_.eps * (lam[j] - lam[k]) / h;
          rhs[k] -= flux / w_here;
          rhs[j] += flux / g_.axis(a).weight(i + 1);
        }
        if (opts_.boundary == BoundaryCondition::Outflow) {
          if (i + 1 == n && fv.edge[ua][k] > 0.0) {
            const double flux = fv.edge[ua][k] * lam[k];
            rhs[k] -= flux / w_here;
            outflux += flux * transverse;
          }
          if (i == 0 && fv.edge[ua][k] < 0.0) {
            const double flux = -fv.edge[ua][k] * lam[k];
            rhs[k] -= flux / w_here;
            outflux += flux * transverse;
          }
        }
      }
    }
    return outflux;
  }

 private:
  const Grid& g_;
  const AdvectOptions& opts_;
  std::vector<double> slopes_;
};

/// Zeroes rounding-level negatives; anything larger is a scheme failure.
inline std::size_t clamp_rounding(std::vector<double>& lam) {
  double scale = 0.0;
  for (double x : lam) scale = std::max(scale, std::abs(x));
  std::size_t count = 0;
  for (double& x : lam) {
    if (x < 0.0) {
      if (x < -1e-12 * scale) throw std::logic_error("advection produced a negative density");
      x = 0.0;
      ++count;
    }
  }
  return count;
}

}  // namespace detail

/**
 * Solves the continuity equation from rho0 over the time grid of `traj`.
 * During [t_k, t_{k+1}] the face velocities are the average of those at the
 * two levels.
 */
inline DensityTrajectory advect(const DensityField& rho0, const PotentialTrajectory& traj, const CostFunction& cost,
                                const AdvectOptions& options = {}) {
  const Grid& g = rho0.grid();
  require_same_grid(g, traj.grid(), "advect");
  if (options.grid_viscosity && !(options.kappa >= 0.0)) throw InvalidArgument("kappa must be >= 0");
  AdvectOptions opts = options;
  if (opts.grid_viscosity) opts.eps = opts.kappa * g.min_spacing();
  if (!(opts.eps >= 0.0)) throw InvalidArgument("diffusion coefficient must be >= 0");
  if (!(opts.cfl > 0.0 && opts.cfl <= 1.0)) throw InvalidArgument("cfl must lie in (0, 1]");
  const TimeGrid& tg = traj.time_grid;

  DensityTrajectory out;
  out.time_grid = tg;
  out.snapshots.reserve(tg.steps() + 1);
  out.snapshots.push_back(rho0.field());
  out.masses.push_back(integrate(rho0));
  out.outflux.push_back(0.0);
  out.min_value = rho0.field().min();

  std::vector<double> lam = rho0.field().to_vector();
  std::vector<double> r1(g.size()), r2(g.size()), stage(g.size());
  detail::FluxStepper stepper(g, opts);
  const bool track_floor = cost.q() < 2.0;

  detail::FaceVelocities prev = detail::face_velocities(traj.snapshots[0], cost, opts.mollify_width);
  for (std::size_t k = 0; k < tg.steps(); ++k) {
    const detail::FaceVelocities next = detail::face_velocities(traj.snapshots[k + 1], cost, opts.mollify_width);
    detail::FaceVelocities fv;
    for (int a = 0; a < g.dim(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      fv.faces[ua].resize(g.size());
      fv.edge[ua].resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        fv.faces[ua][i] = 0.5 * (prev.faces[ua][i] + next.faces[ua][i]);
        fv.edge[ua][i] = 0.5 * (prev.edge[ua][i] + next.edge[ua][i]);
      }
      if (track_floor) {
        const std::size_t st = g.stride(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (g.multi_index(i)[ua] + 1 == g.n(a)) continue;
          const bool massive = lam[i] > opts.mass_floor || lam[i + st] > opts.mass_floor;
          if (massive && prev.gnorm[ua][i] < opts.gradient_floor) ++out.low_gradient_events;
        }
      }
    }

    const double dt = tg.dt();
    const double rate = stepper.outflow_rate(fv);
    const double needed = std::ceil(dt * rate / opts.cfl);
    if (needed > static_cast<double>(opts.max_substeps)) {
      throw CflUnsatisfiable("advection step " + std::to_string(k) + " needs " + std::to_string(needed) +
                             " substeps, cap is " + std::to_string(opts.max_substeps));
    }
    const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(needed));
    const double sub = dt / static_cast<double>(m);
    double step_outflux = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double o1 = stepper.rhs(lam, fv, r1);
      for (std::size_t i = 0; i < lam.size(); ++i) stage[i] = lam[i] + sub * r1[i];
      out.clamped += detail::clamp_rounding(stage);
      if (opts.scheme == AdvectionScheme::Muscl) {
        const double o2 = stepper.rhs(stage, fv, r2);
        for (std::size_t i = 0; i < lam.size(); ++i) lam[i] = 0.5 * lam[i] + 0.5 * (stage[i] + sub * r2[i]);
        out.clamped += detail::clamp_rounding(lam);
        step_outflux += 0.5 * sub * (o1 + o2);
      } else {
        lam.swap(stage);
        step_outflux += sub * o1;
      }
    }
    out.substeps += m;

    ScalarField snap(g, lam);
    const double mass = integrate(snap);
    out.max_step_drift = std::max(out.max_step_drift, std::abs(mass - out.masses.back() + step_outflux));
    if (mass > out.masses.back() + 1e-12) out.l1_nonincreasing = false;
    out.min_value = std::min(out.min_value, snap.min());
    out.masses.push_back(mass);
    out.outflux.push_back(out.outflux.back() + step_outflux);
    out.snapshots.push_back(std::move(snap));
    prev = next;
  }
  return out;
}

inline DensityTrajectory advect(const DensityField& rho0, const PotentialTrajectory& traj, const CostFunction& cost,
                                double eps) {
  AdvectOptions opts;
  opts.eps = eps;
  return advect(rho0, traj, cost, opts);
}

struct FlowMap {
  Grid grid;
  /// X(1; x) for every seed node x.
  VectorField endpoints;
  /// Seed nodes whose path was clipped to the box at least once.
  std::size_t clip_count = 0;
};

/// Integrates dX/dt = V(t, X), X(0) = x from every node with classical RK4,
/// one step per time interval, multilinear interpolation in space and linear
/// interpolation in time of the nodal feedback velocity.
inline FlowMap flow_map(const PotentialTrajectory& traj, const CostFunction& cost, double mollify_width = 0.0) {
  const Grid& g = traj.grid();
  const TimeGrid& tg = traj.time_grid;
  std::vector<VectorField> vel;
  vel.reserve(tg.steps() + 1);
  for (std::size_t k = 0; k <= tg.steps(); ++k) vel.push_back(velocity(traj, k, cost, mollify_width));

  auto sample = [&](std::size_t k, double theta, const Point& x) {
    Point out{0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const double v0 = interpolate(vel[k].component(a), g, x);
      const double v1 = theta > 0.0 ? interpolate(vel[k + 1].component(a), g, x) : 0.0;
      out[ua] = (1.0 - theta) * v0 + theta * v1;
    }
    return out;
  };

  std::array<std::vector<double>, 2> ends{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  std::size_t clips = 0;
  const double dt = tg.dt();
  for (std::size_t node = 0; node < g.size(); ++node) {
    Point x = g.coord(node);
    bool clipped = false;
    for (std::size_t k = 0; k < tg.steps(); ++k) {
      auto axpy = [&](const Point& base, const Point& d, double s) {
        Point r{base[0] + s * d[0], base[1] + s * d[1]};
        g.clamp(r);
        return r;
      };
      const Point k1 = sample(k, 0.0, x);
      const Point k2 = sample(k, 0.5, axpy(x, k1, 0.5 * dt));
      const Point k3 = sample(k, 0.5, axpy(x, k2, 0.5 * dt));
      const Point k4 = sample(k, 1.0, axpy(x, k3, dt));
      for (std::size_t a = 0; a < 2; ++a) x[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
      if (g.clamp(x)) clipped = true;
    }
    if (clipped) ++clips;
    ends[0][node] = x[0];
    ends[1][node] = x[1];
  }
  return {g, VectorField(g, std::move(ends)), clips};
}

/// Space-time integral of lambda * c(V) with V the nodal feedback velocity;
/// trapezoid rule in time and space.
inline double kinetic_action(const DensityTrajectory& dens, const PotentialTrajectory& traj, const CostFunction& cost,
                             double mollify_width = 0.0) {
  if (!(dens.time_grid == traj.time_grid)) throw DimensionMismatch("kinetic_action: time grids differ");
  const TimeGrid& tg = traj.time_grid;
  const Grid& g = traj.grid();
  double total = 0.0;
  for (std::size_t k = 0; k <= tg.steps(); ++k) {
    const VectorField v = velocity(traj, k, cost, mollify_width);
    const auto& lam = dens.snapshots[k];
    double level = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) level += g.weight(i) * lam[i] * cost.eval(v.at(i));
    const double wt = (k == 0 || k == tg.steps()) ? 0.5 * tg.dt() : tg.dt();
    total += wt * level;
  }
  return total;
}

/// Integral of c(X(1; x) - x) rho0(x): the straight-line cost of the flow's
/// endpoints, a lower bound for its kinetic action by Jensen's inequality.
inline double jensen_lower_bound(const FlowMap& fm, const DensityField& rho0, const CostFunction& cost) {
  const Grid& g = rho0.grid();
  require_same_grid(g, fm.grid, "jensen_lower_bound");
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.coord(i);
    const Point end = fm.endpoints.at(i);
    total += g.weight(i) * rho0[i] * cost.eval({end[0] - x[0], end[1] - x[1]});
  }
  return total;
}

/// A space-time test function with its derivatives.
struct TestFunction {
  std::function<double(double, const Point&)> value;
  std::function<double(double, const Point&)> dt;
  std::function<Point(double, const Point&)> grad;
};

/**
 * Discrete weak-form defect of the continuity equation,
 *   int int (lambda psi_t + lambda V . grad psi) dx dt
 *     - [int lambda(1) psi(1) dx - int rho0 psi(0) dx],
 * which vanishes for an exact weak solution.
 */
inline double weak_form_residual(const DensityTrajectory& dens, const PotentialTrajectory& traj,
                                 const CostFunction& cost, const TestFunction& psi) {
  const TimeGrid& tg = traj.time_grid;
  const Grid& g = traj.grid();
  double bulk = 0.0;
  for (std::size_t k = 0; k <= tg.steps(); ++k) {
    const double t = tg.time(k);
    const VectorField v = velocity(traj, k, cost);
    const auto& lam = dens.snapshots[k];
    double level = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point x = g.coord(i);
      level += g.weight(i) * lam[i] * (psi.dt(t, x) + dot(v.at(i), psi.grad(t, x)));
    }
    bulk += ((k == 0 || k == tg.steps()) ? 0.5 * tg.dt() : tg.dt()) * level;
  }
  double boundary = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.coord(i);
    boundary += g.weight(i) * (dens.final()[i] * psi.value(1.0, x) - dens.snapshots[0][i] * psi.value(0.0, x));
  }
  return bulk - boundary;
}

}  // namespace mkflow
