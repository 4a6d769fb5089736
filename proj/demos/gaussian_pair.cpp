// Transport between two 1D Gaussians with the quadratic cost, compared with
// the closed form ((m1 - m0)^2 + (s1 - s0)^2) / 2 and with the monotone
// rearrangement. Writes x, M(x) and the rearrangement to gaussian_pair.csv.

#include <cmath>
#include <cstdio>

#include "mkflow/mkflow.hpp"

using namespace mkflow;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 256;
  const double m0 = -0.25, s0 = 0.1, m1 = 0.25, s1 = 0.15;
  const Grid g(AxisSpec{-1.0, 1.0, n});
  auto gauss = [&](double m, double s) {
    return normalize(ScalarField::from_function(g, [&](const Point& x) {
      return std::exp(-(x[0] - m) * (x[0] - m) / (2 * s * s));
    }));
  };
  const DensityField rho0 = gauss(m0, s0), rho1 = gauss(m1, s1);
  const CostFunction cost(2.0);

  const DualSolution sol = maximize(rho0, rho1, cost);
  const DistanceReport r = report(sol, rho0, rho1, cost);
  const QuantileMap qm = quantile_map_1d(rho0, rho1, cost);
  const double exact = ((m1 - m0) * (m1 - m0) + (s1 - s0) * (s1 - s0)) / 2;

  std::printf("N = %zu, %zu iterations (%s)\n", n, sol.iterations, to_string(sol.termination));
  std::printf("closed form     %.6f\n", exact);
  std::printf("rearrangement   %.6f\n", qm.cost);
  std::printf("dual value      %.6f\n", r.dual_value);
  std::printf("kinetic action  %.6f\n", r.kinetic);
  std::printf("map cost        %.6f\n", r.map_cost);

  const MongeMap m = map_from_potential(sol.u_bar, cost);
  std::string csv = "x,map,rearrangement\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    csv += format_real(g.coord(k)[0]) + "," + format_real(m.target.at(k)[0]) + "," + format_real(qm.map[k]) + "\n";
  }
  write_text("gaussian_pair.csv", csv);
}
