#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mkflow/mkflow.hpp"

namespace testing_support {

using namespace mkflow;

inline Grid line(std::size_t n, double lo = -1.0, double hi = 1.0) { return Grid(AxisSpec{lo, hi, n}); }

inline Grid square(std::size_t n, double lo = -1.0, double hi = 1.0) {
  return Grid(AxisSpec{lo, hi, n}, AxisSpec{lo, hi, n});
}

inline DensityField gaussian(const Grid& g, Point mean, double sigma) {
  return normalize(ScalarField::from_function(g, [&](const Point& x) {
    const Point d{x[0] - mean[0], g.dim() == 2 ? x[1] - mean[1] : 0.0};
    return std::exp(-dot(d, d) / (2.0 * sigma * sigma));
  }));
}

inline ScalarField random_field(const Grid& g, std::mt19937_64& rng, double amplitude = 1.0) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<double> v(g.size());
  for (double& x : v) x = u(rng);
  return {g, std::move(v)};
}

/// Smooth trigonometric field with a bounded second derivative, the kind of
/// terminal potential the solver produces (no shocks in the flow).
inline ScalarField smooth_field(const Grid& g, std::mt19937_64& rng, double curvature = 0.8) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  struct Mode {
    double amp, k, ph, k1, ph1;
  };
  std::vector<Mode> modes;
  for (int k = 1; k <= 4; ++k) modes.push_back({n01(rng) / k, static_cast<double>(k), phase(rng), 1.0 + k % 2, phase(rng)});
  auto f = [&](const Point& x) {
    double s = 0.0;
    for (const auto& m : modes) {
      s += m.amp * std::sin(m.k * M_PI * x[0] / 2.0 + m.ph) * (g.dim() == 2 ? std::cos(m.k1 * x[1] + m.ph1) : 1.0);
    }
    return s;
  };
  ScalarField raw = ScalarField::from_function(g, f);
  // Rescale so that the largest second difference quotient is `curvature`.
  double worst = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t st = g.stride(a);
    const double h = g.h(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::size_t i = g.multi_index(k)[static_cast<std::size_t>(a)];
      if (i == 0 || i + 1 == g.n(a)) continue;
      worst = std::max(worst, std::abs(raw[k + st] - 2.0 * raw[k] + raw[k - st]) / (h * h));
    }
  }
  std::vector<double> v = raw.to_vector();
  for (double& x : v) x *= curvature / worst;
  return {g, std::move(v)};
}

/// Independent brute-force c-transform from node coordinates.
inline std::vector<double> brute_c_transform(const ScalarField& u, const CostFunction& c) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size());
  for (std::size_t y = 0; y < g.size(); ++y) {
    double best = INFINITY;
    for (std::size_t x = 0; x < g.size(); ++x) {
      const Point px = g.coord(x), py = g.coord(y);
      best = std::min(best, c.eval({px[0] - py[0], px[1] - py[1]}) - u[x]);
    }
    out[y] = best;
  }
  return out;
}

}  // namespace testing_support
