// mkflow: batch front end for the transport solver.
//
// Exit codes: 0 success, 1 usage / input / output error, 2 the solver hit
// its iteration cap before converging (reports are still written).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mkflow/mkflow.hpp"

namespace fs = std::filesystem;
using namespace mkflow;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNotConverged = 2;

struct Common {
  int threads = 0;
  std::uint64_t seed = 0;  // reserved; no command is randomised
};

void apply_threads(const Common& c) {
  int n = c.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("MKFLOW_THREADS")) n = std::atoi(env);
  }
  set_thread_count(n);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads (default: $MKFLOW_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", c.seed, "Random seed (accepted for scripting; unused)");
}

/// Reads a density file, naming the flag when the data are unusable.
DensityField load_density(const std::string& path, const char* flag) {
  ScalarField f = [&] {
    try {
      return read_field(path);
    } catch (const Error& e) {
      throw Error(std::string(flag) + " " + path + ": " + e.what());
    }
  }();
  try {
    return DensityField(std::move(f));
  } catch (const Error& e) {
    throw Error(std::string(flag) + " " + path + ": " + e.what());
  }
}

ScalarField load_field(const std::string& path, const char* flag) {
  try {
    return read_field(path);
  } catch (const Error& e) {
    throw Error(std::string(flag) + " " + path + ": " + e.what());
  }
}

AdvectionScheme parse_scheme(const std::string& s) {
  return s == "upwind" ? AdvectionScheme::Upwind : AdvectionScheme::Muscl;
}

void print_kv(const char* key, double value) { std::printf("%s = %s\n", key, format_real(value).c_str()); }

void write_json(const std::string& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

double max_deviation(const VectorField& a, const VectorField& b, const Grid& g) {
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point pa = a.at(k), pb = b.at(k);
    worst = std::max(worst, norm({pa[0] - pb[0], pa[1] - pb[1]}));
  }
  return worst;
}

// ---------------------------------------------------------------- distance

struct DistanceArgs {
  Common common;
  std::string rho0, rho1, report, history, save_dir, scheme = "muscl";
  double p = 2.0;
  std::size_t n_time = 0;
  double tol = 1e-3;
  std::size_t max_iters = 500;
  double mollify = 0.0;
  bool warm_start = false;
};

int run_distance(const DistanceArgs& a) {
  apply_threads(a.common);
  const CostFunction cost(a.p);
  const DensityField rho0 = load_density(a.rho0, "--rho0");
  const DensityField rho1 = load_density(a.rho1, "--rho1");
  if (!(rho0.grid() == rho1.grid())) throw Error("--rho1 " + a.rho1 + ": grid differs from --rho0");

  SolverOptions opts;
  opts.nt = a.n_time;
  opts.grad_tol = a.tol;
  opts.max_iters = a.max_iters;
  opts.mollify_width = a.mollify;
  opts.quantile_warm_start = a.warm_start;
  opts.advect.scheme = parse_scheme(a.scheme);
  const DualSolution sol = maximize(rho0, rho1, cost, opts);
  const DistanceReport r = report(sol, rho0, rho1, cost, a.mollify);

  print_kv("distance", r.dual_value);
  print_kv("kinetic", r.kinetic);
  print_kv("map_cost", r.map_cost);
  print_kv("gap_dual_kinetic", r.gap_dual_kinetic);
  print_kv("gap_dual_map", r.gap_dual_map);
  print_kv("terminal_mismatch", r.terminal_mismatch);
  std::printf("termination = %s after %zu iterations\n", r.termination.c_str(), r.iterations);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  if (!a.report.empty()) write_json(a.report, report_json(r));
  if (!a.history.empty()) write_text(a.history, format_history_csv(sol.history));
  if (!a.save_dir.empty()) {
    fs::create_directories(a.save_dir);
    write_field(sol.u_bar, fs::path(a.save_dir) / "u_bar.field");
    write_field(sol.v_bar, fs::path(a.save_dir) / "v_bar.field");
  }
  // A line-search stall means no ascent is left at this resolution.
  return sol.termination == Termination::MaxIterations ? kNotConverged : kOk;
}

// ---------------------------------------------------------------- map

struct MapArgs {
  Common common;
  std::string potential, rho0, rho1, out_dir, stem = "map", report;
  double p = 2.0, mollify = 0.0;
};

int run_map(const MapArgs& a) {
  apply_threads(a.common);
  const CostFunction cost(a.p);
  const ScalarField u = load_field(a.potential, "--potential");
  const MongeMap m = map_from_potential(u, cost, a.mollify);
  write_map(m, a.out_dir, a.stem);

  nlohmann::ordered_json j;
  j["clip_count"] = m.clip_count;
  std::printf("clip_count = %zu\n", m.clip_count);
  if (!a.rho0.empty()) {
    const DensityField rho0 = load_density(a.rho0, "--rho0");
    require_same_grid(u.grid(), rho0.grid(), "--rho0");
    const double c = map_cost(m, rho0, cost);
    print_kv("map_cost", c);
    j["map_cost"] = c;
    write_field(pushforward(m, rho0).field(), fs::path(a.out_dir) / (a.stem + "_pushforward.field"));
    if (!a.rho1.empty()) {
      const DensityField rho1 = load_density(a.rho1, "--rho1");
      const double pe = pushforward_error(m, rho0, rho1);
      print_kv("pushforward_error", pe);
      j["pushforward_error"] = pe;
      if (cost.quadratic()) {
        const double ma = monge_ampere_residual(u, rho0, rho1, a.mollify);
        print_kv("monge_ampere_residual", ma);
        j["monge_ampere_residual"] = ma;
      }
    }
  }
  if (!a.report.empty()) write_json(a.report, j);
  return kOk;
}

// ---------------------------------------------------------------- flow

struct FlowArgs {
  Common common;
  std::string terminal, rho0, out_dir, stem = "density", compare_map, scheme = "muscl";
  std::string boundary = "noflux";
  double p = 2.0, eps = 0.0, mollify = 0.0;
  std::optional<double> kappa;
  std::size_t n_time = 0;
};

int run_flow(const FlowArgs& a) {
  apply_threads(a.common);
  const CostFunction cost(a.p);
  const ScalarField v = load_field(a.terminal, "--terminal");
  const DensityField rho0 = load_density(a.rho0, "--rho0");
  require_same_grid(v.grid(), rho0.grid(), "--rho0");
  const Grid& g = v.grid();
  const TimeGrid tg(a.n_time > 0 ? a.n_time : default_time_steps(g));

  const PotentialTrajectory traj = lax_hopf_solve(v, cost, tg);
  AdvectOptions o;
  o.eps = a.eps;
  if (a.kappa) {
    o.grid_viscosity = true;
    o.kappa = *a.kappa;
  }
  o.scheme = parse_scheme(a.scheme);
  o.boundary = a.boundary == "outflow" ? BoundaryCondition::Outflow : BoundaryCondition::NoFlux;
  const DensityTrajectory dens = advect(rho0, traj, cost, o);
  write_trajectory(dens.snapshots, tg, a.out_dir, a.stem);

  // Kinetic action accumulated with the same trapezoid rule as kinetic_action.
  std::string csv = "t,mass,kinetic\n";
  double total = 0.0, prev_level = 0.0;
  for (std::size_t k = 0; k <= tg.steps(); ++k) {
    const VectorField vel = velocity(traj, k, cost, a.mollify);
    double level = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) level += g.weight(i) * dens.snapshots[k][i] * cost.eval(vel.at(i));
    if (k > 0) total += 0.5 * tg.dt() * (prev_level + level);
    prev_level = level;
    csv += format_real(tg.time(k)) + "," + format_real(dens.masses[k]) + "," + format_real(total) + "\n";
  }
  write_text(fs::path(a.out_dir) / (a.stem + ".csv"), csv);

  const FlowMap fm = flow_map(traj, cost, a.mollify);
  for (int ax = 0; ax < g.dim(); ++ax) {
    write_field(fm.endpoints.component_field(ax), fs::path(a.out_dir) / ("flow_" + std::to_string(ax) + ".field"));
  }
  print_kv("kinetic", total);
  print_kv("jensen_bound", jensen_lower_bound(fm, rho0, cost));
  print_kv("max_mass_drift", dens.max_step_drift);
  print_kv("min_density", dens.min_value);
  std::printf("flow_clips = %zu\n", fm.clip_count);

  if (!a.compare_map.empty()) {
    // Map component files are <stem>_<axis>.field; pass the first one.
    const fs::path first(a.compare_map);
    std::string base = first.filename().string();
    const auto cut = base.rfind("_0.field");
    if (cut == std::string::npos) throw Error("--compare-map " + a.compare_map + ": expected a <stem>_0.field file");
    base.resize(cut);
    std::array<std::vector<double>, 2> comps{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
    for (int ax = 0; ax < g.dim(); ++ax) {
      const auto path = first.parent_path() / (base + "_" + std::to_string(ax) + ".field");
      const ScalarField c = load_field(path.string(), "--compare-map");
      require_same_grid(g, c.grid(), "--compare-map");
      comps[static_cast<std::size_t>(ax)] = c.to_vector();
    }
    const VectorField target(g, std::move(comps));
    double h = INFINITY;
    for (int ax = 0; ax < g.dim(); ++ax) h = std::min(h, g.h(ax));
    std::printf("max deviation flow vs map = %s (h = %s)\n", format_real(max_deviation(fm.endpoints, target, g)).c_str(),
                format_real(h).c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------- ctransform

struct CTransformArgs {
  Common common;
  std::string input, output, direction = "x-to-y";
  double p = 2.0;
  bool biconjugate = false;
};

int run_ctransform(const CTransformArgs& a) {
  apply_threads(a.common);
  const CostFunction cost(a.p);
  const ScalarField u = load_field(a.input, "--input");
  if (a.biconjugate) {
    write_field(bi_conjugate(u, cost), a.output);
  } else {
    const Direction d = a.direction == "y-to-x" ? Direction::YToX : Direction::XToY;
    write_field(c_transform(u, cost, d).value, a.output);
  }
  return kOk;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  Common common;
  std::string rho0, rho1, method = "quantile", report, plan;
  double p = 2.0;
};

int run_oracle(const OracleArgs& a) {
  apply_threads(a.common);
  const CostFunction cost(a.p);
  const DensityField rho0 = load_density(a.rho0, "--rho0");
  const DensityField rho1 = load_density(a.rho1, "--rho1");
  nlohmann::ordered_json j;
  j["method"] = a.method;
  j["p"] = a.p;
  double c = 0.0;
  if (a.method == "lp") {
    const DiscretePlan plan = lp_transport(rho0, rho1, cost);
    c = plan.cost;
    j["pivots"] = plan.pivots;
    if (!a.plan.empty()) write_text(a.plan, format_plan(plan));
  } else {
    const QuantileMap qm = quantile_map_1d(rho0, rho1, cost);
    c = qm.cost;
    if (!a.plan.empty()) write_field(ScalarField(rho0.grid(), qm.map), a.plan);
  }
  j["cost"] = c;
  print_kv("cost", c);
  if (!a.report.empty()) write_json(a.report, j);
  return kOk;
}

// ---------------------------------------------------------------- gaussian

struct GaussianArgs {
  std::string out;
  std::vector<double> box{-1.0, 1.0};
  std::vector<std::size_t> n{256};
  std::vector<double> mean{0.0};
  double sigma = 0.1;
};

int run_gaussian(const GaussianArgs& a) {
  const std::size_t dim = a.n.size();
  if (dim < 1 || dim > 2 || a.box.size() != 2 * dim || a.mean.size() != dim) {
    throw InvalidArgument("--n, --box and --mean must describe the same dimension (1 or 2)");
  }
  const Grid g = dim == 1 ? Grid(AxisSpec{a.box[0], a.box[1], a.n[0]})
                          : Grid(AxisSpec{a.box[0], a.box[1], a.n[0]}, AxisSpec{a.box[2], a.box[3], a.n[1]});
  const Point m{a.mean[0], dim == 2 ? a.mean[1] : 0.0};
  const auto raw = ScalarField::from_function(g, [&](const Point& x) {
    const Point d{x[0] - m[0], dim == 2 ? x[1] - m[1] : 0.0};
    return std::exp(-dot(d, d) / (2.0 * a.sigma * a.sigma));
  });
  write_field(normalize(raw).field(), a.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport distances, maps and flows on regular grids"};
  app.require_subcommand(1);

  DistanceArgs da;
  auto* distance = app.add_subcommand("distance", "Solve the dual problem and report the transport cost");
  distance->add_option("--rho0", da.rho0, "Source density (.field)")->required()->check(CLI::ExistingFile);
  distance->add_option("--rho1", da.rho1, "Target density (.field)")->required()->check(CLI::ExistingFile);
  distance->add_option("--p", da.p, "Cost exponent, c(z) = |z|^p / p")->check(CLI::Range(1.0 + 1e-12, 1e6));
  distance->add_option("--n-time", da.n_time, "Time steps (default: about one per cell)");
  distance->add_option("--tol", da.tol, "Stop when the L1 marginal mismatch drops below this")
      ->check(CLI::PositiveNumber);
  distance->add_option("--max-iters", da.max_iters, "Iteration cap");
  distance->add_option("--mollify", da.mollify, "Smoothing width for the reported velocity and map")
      ->check(CLI::NonNegativeNumber);
  distance->add_option("--scheme", da.scheme, "Advection scheme")->check(CLI::IsMember({"muscl", "upwind"}));
  distance->add_flag("--warm-start", da.warm_start, "Start from the 1D rearrangement potential");
  distance->add_option("--report", da.report, "Write the report as JSON");
  distance->add_option("--history", da.history, "Write the iteration history as CSV");
  distance->add_option("--save-potentials", da.save_dir, "Write u_bar.field and v_bar.field to this directory");
  add_common(distance, da.common);

  MapArgs ma;
  auto* map = app.add_subcommand("map", "Optimal map from an initial potential");
  map->add_option("--potential", ma.potential, "Initial potential u (.field)")->required()->check(CLI::ExistingFile);
  map->add_option("--p", ma.p, "Cost exponent")->check(CLI::Range(1.0 + 1e-12, 1e6));
  map->add_option("--rho0", ma.rho0, "Source density, for the map cost and pushforward")->check(CLI::ExistingFile);
  map->add_option("--rho1", ma.rho1, "Target density, for the pushforward error")->check(CLI::ExistingFile);
  map->add_option("--mollify", ma.mollify, "Smoothing width for the gradient")->check(CLI::NonNegativeNumber);
  map->add_option("--out", ma.out_dir, "Output directory")->required();
  map->add_option("--stem", ma.stem, "Output file stem");
  map->add_option("--report", ma.report, "Write diagnostics as JSON");
  add_common(map, ma.common);

  FlowArgs fa;
  auto* flow = app.add_subcommand("flow", "Density trajectory and characteristics from a terminal potential");
  flow->add_option("--terminal", fa.terminal, "Terminal potential v (.field)")->required()->check(CLI::ExistingFile);
  flow->add_option("--rho0", fa.rho0, "Initial density (.field)")->required()->check(CLI::ExistingFile);
  flow->add_option("--p", fa.p, "Cost exponent")->check(CLI::Range(1.0 + 1e-12, 1e6));
  flow->add_option("--n-time", fa.n_time, "Time steps");
  flow->add_option("--eps", fa.eps, "Diffusion coefficient")->check(CLI::NonNegativeNumber);
  flow->add_option("--kappa", fa.kappa, "Use diffusion kappa * h instead of --eps")->check(CLI::NonNegativeNumber);
  flow->add_option("--scheme", fa.scheme, "Advection scheme")->check(CLI::IsMember({"muscl", "upwind"}));
  flow->add_option("--boundary", fa.boundary, "Box boundary")->check(CLI::IsMember({"noflux", "outflow"}));
  flow->add_option("--mollify", fa.mollify, "Smoothing width for the velocity")->check(CLI::NonNegativeNumber);
  flow->add_option("--out", fa.out_dir, "Output directory")->required();
  flow->add_option("--stem", fa.stem, "Stem for the density snapshots and CSV");
  flow->add_option("--compare-map", fa.compare_map, "A <stem>_0.field written by `map`; prints the max deviation");
  add_common(flow, fa.common);

  CTransformArgs ca;
  auto* ct = app.add_subcommand("ctransform", "c-transform of a field");
  ct->add_option("--input", ca.input, "Input field")->required()->check(CLI::ExistingFile);
  ct->add_option("--output", ca.output, "Output field")->required();
  ct->add_option("--p", ca.p, "Cost exponent")->check(CLI::Range(1.0 + 1e-12, 1e6));
  ct->add_option("--direction", ca.direction, "x-to-y: inf_x c(x-y) - u(x); y-to-x: inf_y c(x-y) - u(y)")
      ->check(CLI::IsMember({"x-to-y", "y-to-x"}));
  ct->add_flag("--biconjugate", ca.biconjugate, "Write the c-concave envelope instead");
  add_common(ct, ca.common);

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "Reference transport cost by linear programming or 1D rearrangement");
  oracle->add_option("--rho0", oa.rho0, "Source density")->required()->check(CLI::ExistingFile);
  oracle->add_option("--rho1", oa.rho1, "Target density")->required()->check(CLI::ExistingFile);
  oracle->add_option("--p", oa.p, "Cost exponent")->check(CLI::Range(1.0, 1e6));
  oracle->add_option("--method", oa.method, "lp or quantile (1D only)")->check(CLI::IsMember({"lp", "quantile"}));
  oracle->add_option("--report", oa.report, "Write the result as JSON");
  oracle->add_option("--plan", oa.plan, "lp: plan entries as text; quantile: the map as a field");
  add_common(oracle, oa.common);

  GaussianArgs ga;
  auto* gauss = app.add_subcommand("gaussian", "Write a normalised isotropic Gaussian density");
  gauss->add_option("--out", ga.out, "Output field")->required();
  gauss->add_option("--n", ga.n, "Nodes per axis (one or two values)")->expected(1, 2);
  gauss->add_option("--box", ga.box, "min max per axis")->expected(2, 4);
  gauss->add_option("--mean", ga.mean, "Centre (one value per axis)")->expected(1, 2);
  gauss->add_option("--sigma", ga.sigma, "Standard deviation")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*distance) return run_distance(da);
    if (*map) return run_map(ma);
    if (*flow) return run_flow(fa);
    if (*ct) return run_ctransform(ca);
    if (*oracle) return run_oracle(oa);
    if (*gauss) return run_gaussian(ga);
  } catch (const Diverged& e) {
    std::fprintf(stderr, "solver failed: %s\n", e.what());
    return kNotConverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
