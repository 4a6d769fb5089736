#pragma once

/**
 * @file dual_solver.hpp
 * @brief Maximisation of J(v) = int rho1 v - int rho0 phi(0, .) over terminal
 *        potentials v, where phi solves phi_t + c*(grad phi) = 0, phi(1) = v.
 *
 * The derivative of J in direction h is int (rho1 - lambda(1)) h, with lambda
 * the density transported from rho0 by the feedback velocity Dc*(grad phi).
 * The ascent direction is that gradient after an optional H^1 (inverse
 * Neumann Laplacian) smoothing, which removes the mesh dependence of plain L2
 * ascent. Steps are accepted by Armijo backtracking on the exact discrete J.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mkflow/cost.hpp"
#include "mkflow/ctransform.hpp"
#include "mkflow/field_io.hpp"
#include "mkflow/grid.hpp"
#include "mkflow/hj.hpp"
#include "mkflow/monge.hpp"
#include "mkflow/oracle.hpp"
#include "mkflow/transport.hpp"

namespace mkflow {

enum class Preconditioner { H1, L2 };

struct SolverOptions {
  std::size_t max_iters = 500;
  /// Target for the L1 norm of rho1 - lambda(1).
  double grad_tol = 1e-3;
  double step0 = 1.0;
  double max_step = 1e3;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double min_step = 1e-12;
  /// Time steps; 0 picks ceil(1 / h_min).
  std::size_t nt = 0;
  /// Mollification used for the velocity in the reported kinetic action,
  /// flow map and Monge map. The gradient itself never mollifies.
  double mollify_width = 0.0;
  /// Replace the iterate by its bi-c-conjugate every this many iterations
  /// (0 disables; the final iterate is always projected).
  std::size_t biconj_every = 10;
  Preconditioner preconditioner = Preconditioner::H1;
  AdvectOptions advect{};
  /// Constant of the semiconvexity monitor on the iterates.
  double semiconvexity_C = 10.0;
  /// Start from the 1D monotone-rearrangement potential (1D only).
  bool quantile_warm_start = false;
};

enum class Termination { Converged, MaxIterations, LineSearchFailed };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

struct HistoryEntry {
  std::size_t iter;
  double J;
  double grad_norm;
  double step;
};

struct DualSolution {
  ScalarField v_bar;
  ScalarField u_bar;
  PotentialTrajectory traj;
  DensityTrajectory dens;
  /// rho1 - lambda(1) at v_bar.
  ScalarField gradient;
  std::vector<HistoryEntry> history;
  Termination termination = Termination::MaxIterations;
  double grad_tol = 0.0;
  std::size_t iterations = 0;
  std::size_t semiconvexity_violations = 0;
  std::vector<std::string> warnings;

  [[nodiscard]] bool converged() const { return termination == Termination::Converged; }
};

struct DistanceReport {
  double dual_value = 0.0;
  double kinetic = 0.0;
  double map_cost = 0.0;
  double gap_dual_kinetic = 0.0;
  double gap_dual_map = 0.0;
  double terminal_mismatch = 0.0;
  bool converged = false;

  double jensen_bound = 0.0;
  double pushforward_error = 0.0;
  /// Only computed for the quadratic cost; NaN otherwise.
  double monge_ampere_residual = 0.0;
  double max_mass_drift = 0.0;
  double min_density = 0.0;
  std::size_t map_clips = 0;
  std::size_t flow_clips = 0;
  std::size_t iterations = 0;
  std::size_t time_steps = 0;
  std::string termination;
  double p = 2.0;
  std::vector<std::string> warnings;
};

inline std::size_t default_time_steps(const Grid& g) {
  return static_cast<std::size_t>(std::ceil(1.0 / g.min_spacing() - 1e-9));
}

/// J(v). Only phi(0, .) is needed, which is one c-transform of v.
inline double objective(const ScalarField& v, const DensityField& rho0, const DensityField& rho1,
                        const CostFunction& cost) {
  const Grid& g = v.grid();
  require_same_grid(g, rho0.grid(), "objective");
  require_same_grid(g, rho1.grid(), "objective");
  const CTransformResult u = c_transform(v, cost, Direction::YToX);
  double total = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) total += g.weight(k) * (rho1[k] * v[k] + rho0[k] * u.value[k]);
  return total;
}

/// rho1 - lambda(1) for the Lax-Hopf trajectory of v.
inline ScalarField grad(const ScalarField& v, const DensityField& rho0, const DensityField& rho1,
                        const CostFunction& cost, const TimeGrid& tg, const AdvectOptions& opts = {}) {
  require_same_grid(v.grid(), rho1.grid(), "grad");
  const PotentialTrajectory traj = lax_hopf_solve(v, cost, tg);
  const DensityTrajectory dens = advect(rho0, traj, cost, opts);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = rho1[k] - dens.final()[k];
  return {v.grid(), std::move(out)};
}

namespace detail {

/// Solves -Laplace(d) = g - mean(g) with homogeneous Neumann conditions in
/// the finite-volume form matching the trapezoid cells; returns the
/// mean-free solution.
inline std::vector<double> inverse_laplacian(std::span<const double> gin, const Grid& g) {
  const std::size_t n = g.size();
  const double vol = g.volume();
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean += g.weight(k) * gin[k];
  mean /= vol;
  std::vector<double> rhs(n);
  for (std::size_t k = 0; k < n; ++k) rhs[k] = g.weight(k) * (gin[k] - mean);

  auto remove_mean = [&](std::vector<double>& d) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m += g.weight(k) * d[k];
    m /= vol;
    for (double& x : d) x -= m;
  };

  std::vector<double> d(n, 0.0);
  if (g.dim() == 1) {
    // Face fluxes are partial sums of the cell sources.
    const double h = g.h(0);
    double flux = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      flux += rhs[i];
      d[i + 1] = d[i] - flux * h;
    }
    remove_mean(d);
    return d;
  }

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (int a = 0; a < 2; ++a) {
      const std::size_t st = g.stride(a);
      const double h = g.h(a);
      for (std::size_t k = 0; k < n; ++k) {
        if (g.multi_index(k)[static_cast<std::size_t>(a)] + 1 == g.n(a)) continue;
        const double area = g.weight(k) / g.axis(a).weight(g.multi_index(k)[static_cast<std::size_t>(a)]);
        const double f = area * (x[k] - x[k + st]) / h;
        y[k] += f;
        y[k + st] -= f;
      }
    }
  };
  std::vector<double> r = rhs, p = rhs, ap(n);
  double rr = 0.0;
  for (double x : r) rr += x * x;
  const double stop = 1e-24 * std::max(rr, 1e-300);
  for (std::size_t it = 0; it < 20 * n && rr > stop; ++it) {
    apply(p, ap);
    double pap = 0.0;
    for (std::size_t k = 0; k < n; ++k) pap += p[k] * ap[k];
    if (pap <= 0.0) break;
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      d[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
      rr_new += r[k] * r[k];
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
  }
  remove_mean(d);
  return d;
}

inline void validate(const SolverOptions& o) {
  if (!(o.grad_tol > 0.0)) throw InvalidArgument("grad_tol must be positive");
  if (!(o.step0 > 0.0) || !(o.max_step >= o.step0)) throw InvalidArgument("step sizes must be positive");
  if (!(o.backtrack > 0.0 && o.backtrack < 1.0)) throw InvalidArgument("backtrack must lie in (0, 1)");
  if (!(o.armijo > 0.0 && o.armijo < 1.0)) throw InvalidArgument("armijo constant must lie in (0, 1)");
  if (!(o.min_step > 0.0)) throw InvalidArgument("min_step must be positive");
  if (!(o.mollify_width >= 0.0)) throw InvalidArgument("mollify_width must be >= 0");
}

}  // namespace detail

/**
 * Gradient ascent on J from v0 (zero by default). Stops when the L1 mismatch
 * rho1 - lambda(1) drops to grad_tol, after max_iters steps, or when no step
 * of at least min_step increases J. The last case is the usual outcome once
 * the iterate sits at the discretisation floor of the mismatch; it is
 * reported, not thrown. Only a failure at the very first iteration, where no
 * progress was made at all, raises Diverged.
 */
inline DualSolution maximize(const DensityField& rho0, const DensityField& rho1, const CostFunction& cost,
                             const SolverOptions& opts = {}, const std::optional<ScalarField>& v0 = std::nullopt) {
  detail::validate(opts);
  const Grid& g = rho0.grid();
  require_same_grid(g, rho1.grid(), "maximize");
  const TimeGrid tg(opts.nt > 0 ? opts.nt : default_time_steps(g));

  ScalarField v = ScalarField::constant(g, 0.0);
  if (v0) {
    require_same_grid(g, v0->grid(), "maximize: initial potential");
    v = *v0;
  } else if (opts.quantile_warm_start) {
    const QuantileMap qm = quantile_map_1d(rho0, rho1, cost);
    const ScalarField u = quantile_potential_1d(qm, g, cost);
    v = c_transform(u, cost, Direction::XToY).value;
  }

  DualSolution sol;
  sol.grad_tol = opts.grad_tol;
  double J = objective(v, rho0, rho1, cost);
  double step = opts.step0;
  double last_step = 0.0;

  auto evaluate = [&](const ScalarField& at, PotentialTrajectory& traj, DensityTrajectory& dens) {
    traj = lax_hopf_solve(at, cost, tg);
    dens = advect(rho0, traj, cost, opts.advect);
    std::vector<double> r(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) r[k] = rho1[k] - dens.final()[k];
    return ScalarField(g, std::move(r));
  };

  PotentialTrajectory traj;
  DensityTrajectory dens;
  for (std::size_t iter = 0;; ++iter) {
    const ScalarField gr = evaluate(v, traj, dens);
    const double gnorm = l1_distance(rho1.values(), dens.final().values(), g);
    sol.history.push_back({iter, J, gnorm, last_step});
    sol.iterations = iter;
    if (gnorm <= opts.grad_tol) {
      sol.termination = Termination::Converged;
      break;
    }
    if (iter == opts.max_iters) {
      sol.termination = Termination::MaxIterations;
      break;
    }
    std::vector<double> dir = opts.preconditioner == Preconditioner::H1
                                  ? detail::inverse_laplacian(gr.values(), g)
                                  : gr.to_vector();
    const double slope = inner(gr.values(), dir, g);

    step = std::min(2.0 * step, opts.max_step);
    bool accepted = false;
    ScalarField trial;
    double J_trial = J;
    if (slope > 0.0) {
      while (step >= opts.min_step) {
        std::vector<double> tv(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) tv[k] = v[k] + step * dir[k];
        trial = ScalarField(g, std::move(tv));
        J_trial = objective(trial, rho0, rho1, cost);
        if (J_trial >= J + opts.armijo * step * slope) {
          accepted = true;
          break;
        }
        step *= opts.backtrack;
      }
    }
    if (!accepted) {
      if (iter == 0) {
        throw Diverged("no ascent step of at least " + format_real(opts.min_step) + " from the initial potential");
      }
      sol.termination = Termination::LineSearchFailed;
      break;
    }
    v = std::move(trial);
    J = J_trial;
    last_step = step;

    if (opts.biconj_every > 0 && (iter + 1) % opts.biconj_every == 0) {
      ScalarField vb = bi_conjugate(v, cost);
      const double Jb = objective(vb, rho0, rho1, cost);
      if (Jb >= J) {
        v = std::move(vb);
        J = Jb;
      }
    }
    if (!semiconvexity_check(v, opts.semiconvexity_C)) ++sol.semiconvexity_violations;
  }

  // Final c-concave projection; it can only raise J.
  {
    ScalarField vb = bi_conjugate(v, cost);
    const double Jb = objective(vb, rho0, rho1, cost);
    if (Jb >= J && !(vb.values().size() == v.values().size() &&
                     std::equal(vb.values().begin(), vb.values().end(), v.values().begin()))) {
      v = std::move(vb);
      J = Jb;
      sol.gradient = evaluate(v, traj, dens);
      const double gnorm = l1_distance(rho1.values(), dens.final().values(), g);
      if (sol.termination != Termination::Converged && gnorm <= opts.grad_tol) {
        sol.termination = Termination::Converged;
      }
      sol.history.back().J = J;
      sol.history.back().grad_norm = gnorm;
    } else {
      std::vector<double> r(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) r[k] = rho1[k] - dens.final()[k];
      sol.gradient = ScalarField(g, std::move(r));
    }
  }

  if (sol.semiconvexity_violations > 0) {
    sol.warnings.push_back("semiconvexity bound C=" + format_real(opts.semiconvexity_C) + " violated at " +
                           std::to_string(sol.semiconvexity_violations) + " iterates");
  }
  if (cost.q() < 2.0 && dens.low_gradient_events > 0) {
    sol.warnings.push_back("|grad phi| below " + format_real(opts.advect.gradient_floor) + " where mass is present (" +
                           std::to_string(dens.low_gradient_events) + " face events)");
  }
  if (dens.clamped > 0) {
    sol.warnings.push_back(std::to_string(dens.clamped) + " rounding-level negative densities reset to zero");
  }

  std::vector<double> u(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) u[k] = -traj.snapshots.front()[k];
  sol.u_bar = ScalarField(g, std::move(u));
  sol.v_bar = std::move(v);
  sol.traj = std::move(traj);
  sol.dens = std::move(dens);
  return sol;
}

inline DistanceReport report(const DualSolution& sol, const DensityField& rho0, const DensityField& rho1,
                             const CostFunction& cost, double mollify_width = 0.0) {
  DistanceReport r;
  r.dual_value = objective(sol.v_bar, rho0, rho1, cost);
  r.kinetic = kinetic_action(sol.dens, sol.traj, cost, mollify_width);
  const MongeMap m = map_from_potential(sol.u_bar, cost, mollify_width);
  r.map_cost = map_cost(m, rho0, cost);
  r.gap_dual_kinetic = std::abs(r.dual_value - r.kinetic);
  r.gap_dual_map = std::abs(r.dual_value - r.map_cost);
  r.terminal_mismatch = l1_distance(rho1.values(), sol.dens.final().values(), rho0.grid());
  r.converged = r.terminal_mismatch <= sol.grad_tol;

  const FlowMap fm = flow_map(sol.traj, cost, mollify_width);
  r.jensen_bound = jensen_lower_bound(fm, rho0, cost);
  r.pushforward_error = pushforward_error(m, rho0, rho1);
  r.monge_ampere_residual = cost.quadratic() && [&] {
    for (int a = 0; a < rho0.grid().dim(); ++a) {
      if (rho0.grid().n(a) < 5) return false;
    }
    return true;
  }() ? monge_ampere_residual(sol.u_bar, rho0, rho1, mollify_width)
      : std::nan("");
  r.max_mass_drift = sol.dens.max_step_drift;
  r.min_density = sol.dens.min_value;
  r.map_clips = m.clip_count;
  r.flow_clips = fm.clip_count;
  r.iterations = sol.iterations;
  r.time_steps = sol.traj.time_grid.steps();
  r.termination = to_string(sol.termination);
  r.p = cost.p();
  r.warnings = sol.warnings;
  return r;
}

inline std::string format_report_text(const DistanceReport& r) {
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << "\n"; };
  kv("p", format_real(r.p));
  kv("dual_value", format_real(r.dual_value));
  kv("kinetic", format_real(r.kinetic));
  kv("map_cost", format_real(r.map_cost));
  kv("gap_dual_kinetic", format_real(r.gap_dual_kinetic));
  kv("gap_dual_map", format_real(r.gap_dual_map));
  kv("terminal_mismatch", format_real(r.terminal_mismatch));
  kv("converged", r.converged ? "true" : "false");
  kv("termination", r.termination);
  kv("iterations", std::to_string(r.iterations));
  kv("time_steps", std::to_string(r.time_steps));
  kv("jensen_bound", format_real(r.jensen_bound));
  kv("pushforward_error", format_real(r.pushforward_error));
  kv("monge_ampere_residual", format_real(r.monge_ampere_residual));
  kv("max_mass_drift", format_real(r.max_mass_drift));
  kv("min_density", format_real(r.min_density));
  kv("map_clips", std::to_string(r.map_clips));
  kv("flow_clips", std::to_string(r.flow_clips));
  for (const auto& w : r.warnings) kv("warning", w);
  return out.str();
}

inline nlohmann::ordered_json report_json(const DistanceReport& r) {
  nlohmann::ordered_json j;
  auto num = [](double x) -> nlohmann::ordered_json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  j["p"] = r.p;
  j["dual_value"] = num(r.dual_value);
  j["kinetic"] = num(r.kinetic);
  j["map_cost"] = num(r.map_cost);
  j["gap_dual_kinetic"] = num(r.gap_dual_kinetic);
  j["gap_dual_map"] = num(r.gap_dual_map);
  j["terminal_mismatch"] = num(r.terminal_mismatch);
  j["converged"] = r.converged;
  j["termination"] = r.termination;
  j["iterations"] = r.iterations;
  j["time_steps"] = r.time_steps;
  j["jensen_bound"] = num(r.jensen_bound);
  j["pushforward_error"] = num(r.pushforward_error);
  j["monge_ampere_residual"] = num(r.monge_ampere_residual);
  j["max_mass_drift"] = num(r.max_mass_drift);
  j["min_density"] = num(r.min_density);
  j["map_clips"] = r.map_clips;
  j["flow_clips"] = r.flow_clips;
  j["warnings"] = r.warnings;
  return j;
}

inline std::string format_history_csv(const std::vector<HistoryEntry>& history) {
  std::string out = "iter,J,grad_norm,step\n";
  for (const auto& h : history) {
    out += std::to_string(h.iter) + "," + format_real(h.J) + "," + format_real(h.grad_norm) + "," +
           format_real(h.step) + "\n";
  }
  return out;
}

}  // namespace mkflow
