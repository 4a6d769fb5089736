#include <gtest/gtest.h>

#include "support.hpp"

using namespace mkflow;
using namespace testing_support;

TEST(CTransform, ZeroPotential) {
  for (const Grid& g : {line(33), square(9)}) {
    const auto r = c_transform(ScalarField::constant(g, 0.0), CostFunction(2.0));
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_EQ(r.value[k], 0.0);
      EXPECT_EQ(r.argmin[k], k);
    }
  }
}

TEST(CTransform, AffinePotentialQuadraticCost) {
  // u(x) = b.x - |b|^2/2  =>  v(y) = -b.y where the minimiser y + b is inside.
  const Grid g = line(129);  // h = 1/64
  const double b = 0.25;
  const CostFunction c(2.0);
  const auto u = ScalarField::from_function(g, [&](const Point& x) { return b * x[0] - 0.5 * b * b; });
  const auto r = c_transform(u, c, Direction::XToY);
  const auto brute = brute_c_transform(u, c);
  std::size_t checked = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(r.value[k], brute[k], 1e-13);
    const double y = g.coord(k)[0];
    if (y + b < 1.0 - 1e-12) {
      EXPECT_NEAR(r.value[k], -b * y, 1e-12);
      EXPECT_NEAR(g.coord(r.argmin[k])[0], y + b, 1e-12);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(CTransform, AffinePotential2D) {
  const Grid g = square(33);  // h = 1/16
  const Point b{0.25, -0.125};
  const CostFunction c(2.0);
  const auto u = ScalarField::from_function(g, [&](const Point& x) { return dot(b, x) - 0.5 * dot(b, b); });
  const auto r = c_transform(u, c);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point y = g.coord(k);
    if (!g.contains({y[0] + b[0], y[1] + b[1]})) continue;
    EXPECT_NEAR(r.value[k], -dot(b, y), 1e-12);
  }
}

TEST(CTransform, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (double p : {1.5, 2.0, 3.0}) {
    const CostFunction c(p);
    for (const Grid& g : {line(40), Grid(AxisSpec{-1.0, 1.0, 7}, AxisSpec{0.0, 2.0, 9})}) {
      const auto u = random_field(g, rng);
      const auto r = c_transform(u, c);
      const auto brute = brute_c_transform(u, c);
      for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(r.value[k], brute[k], 1e-13);
    }
  }
}

TEST(CTransform, DirectionsAgreeForRadialCost) {
  std::mt19937_64 rng(4);
  const Grid g = square(8);
  const auto u = random_field(g, rng);
  const CostFunction c(3.0);
  EXPECT_EQ(c_transform(u, c, Direction::XToY).value.to_vector(),
            c_transform(u, c, Direction::YToX).value.to_vector());
}

TEST(CTransform, TiesGoToLowestIndex) {
  // At y = 0 nodes 0 and 2 both give c(1) - 1 = -0.5 < c(0) - u(0).
  const Grid g(AxisSpec{-1.0, 1.0, 3});
  const auto r = c_transform(ScalarField(g, {1.0, 0.0, 1.0}), CostFunction(2.0));
  EXPECT_EQ(r.value[1], -0.5);
  EXPECT_EQ(r.argmin[1], 0u);
}

TEST(CTransform, BoundaryAttainmentFlag) {
  const Grid g = line(21);
  // A steep increasing u pulls every minimiser to the right end.
  const auto u = ScalarField::from_function(g, [](const Point& x) { return 10.0 * x[0]; });
  const auto r = c_transform(u, CostFunction(2.0));
  EXPECT_EQ(r.argmin[0], 20u);
  EXPECT_EQ(r.boundary_attained[0], 1);
  const auto r0 = c_transform(ScalarField::constant(g, 0.0), CostFunction(2.0));
  EXPECT_EQ(r0.boundary_attained[10], 0);
  EXPECT_EQ(r0.boundary_attained[0], 1);
}

TEST(CTransform, DoubleTransformDominates) {
  std::mt19937_64 rng(5);
  const Grid g = line(50);
  const CostFunction c(2.0);
  const auto u = random_field(g, rng);
  const auto back = c_transform(c_transform(u, c).value, c).value;
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_GE(back[k], u[k]);
}

TEST(BiConjugate, FixedPointOfCConcave) {
  const Grid g = square(10);
  const auto z = ScalarField::constant(g, 0.0);
  EXPECT_EQ(bi_conjugate(z, CostFunction(2.0)).to_vector(), z.to_vector());
}

TEST(BiConjugate, FlattensSpikeLikeBruteForce) {
  const Grid g = line(41);
  const CostFunction c(2.0);
  std::vector<double> v(g.size(), 0.0);
  v[7] = -3.0;  // a downward spike is removed by the concave envelope
  const ScalarField u(g, v);
  const auto bc = bi_conjugate(u, c);
  const auto once = brute_c_transform(u, c);
  const auto twice = brute_c_transform(ScalarField(g, once), c);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(bc[k], std::max(twice[k], u[k]), 1e-12);
    EXPECT_GE(bc[k], u[k]);
  }
  EXPECT_GT(bc[7], -3.0);
  EXPECT_EQ(bc[20], 0.0);
}

TEST(BiConjugate, ConcaveTransformsAreMutuallyInverse) {
  std::mt19937_64 rng(6);
  const Grid g = line(60);
  const CostFunction c(2.0);
  const auto v = bi_conjugate(random_field(g, rng), c);
  const auto vv = c_transform(c_transform(v, c).value, c).value;
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(vv[k], v[k], 1e-12);
}
