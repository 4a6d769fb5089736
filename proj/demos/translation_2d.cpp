// A 2D Gaussian moved by a fixed vector: the optimal map is the translation
// and the quadratic cost is |a|^2 / 2.

#include <cmath>
#include <cstdio>

#include "mkflow/mkflow.hpp"

using namespace mkflow;

int main() {
  const Grid g(AxisSpec{-1.0, 1.0, 48}, AxisSpec{-1.0, 1.0, 48});
  const Point a{0.2, -0.1};
  auto gauss = [&](Point c) {
    return normalize(ScalarField::from_function(g, [&](const Point& x) {
      const Point d{x[0] - c[0], x[1] - c[1]};
      return std::exp(-dot(d, d) / (2 * 0.12 * 0.12));
    }));
  };
  const DensityField rho0 = gauss({-a[0] / 2, -a[1] / 2});
  const DensityField rho1 = gauss({a[0] / 2, a[1] / 2});
  const CostFunction cost(2.0);

  const DualSolution sol = maximize(rho0, rho1, cost);
  const DistanceReport r = report(sol, rho0, rho1, cost);
  const MongeMap m = map_from_potential(sol.u_bar, cost);
  Point mean{0.0, 0.0};
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (std::size_t ax = 0; ax < 2; ++ax) mean[ax] += g.weight(k) * rho0[k] * (m.target.at(k)[ax] - g.coord(k)[ax]);
  }

  std::printf("expected cost      %.6f\n", dot(a, a) / 2);
  std::printf("dual value         %.6f\n", r.dual_value);
  std::printf("kinetic action     %.6f\n", r.kinetic);
  std::printf("mean displacement  (%.4f, %.4f), expected (%.4f, %.4f)\n", mean[0], mean[1], a[0], a[1]);
  std::printf("%zu iterations (%s)\n", sol.iterations, to_string(sol.termination));
}
