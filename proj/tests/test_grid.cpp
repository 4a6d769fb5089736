#include <gtest/gtest.h>

#include "support.hpp"

using namespace mkflow;
using namespace testing_support;

TEST(Grid, AxisGeometry) {
  const AxisSpec ax{0.0, 1.0, 11};
  EXPECT_DOUBLE_EQ(ax.spacing(), 0.1);
  EXPECT_EQ(ax.coord(0), 0.0);
  EXPECT_EQ(ax.coord(10), 1.0);
  EXPECT_DOUBLE_EQ(ax.weight(0), 0.05);
  EXPECT_DOUBLE_EQ(ax.weight(5), 0.1);
}

TEST(Grid, RejectsBadAxes) {
  EXPECT_THROW(Grid(AxisSpec{1.0, 0.0, 5}), InvalidArgument);
  EXPECT_THROW(Grid(AxisSpec{0.0, 1.0, 1}), InvalidArgument);
  EXPECT_THROW(Grid(AxisSpec{0.0, 1.0, 4}, AxisSpec{0.0, 0.0, 4}), InvalidArgument);
}

TEST(Grid, NodeCountAndIndexing) {
  const Grid g(AxisSpec{-1.0, 1.0, 5}, AxisSpec{0.0, 2.0, 3});
  EXPECT_EQ(g.size(), 15u);
  const std::size_t k = g.index(3, 2);
  EXPECT_EQ(g.multi_index(k), (std::array<std::size_t, 2>{3, 2}));
  EXPECT_DOUBLE_EQ(g.coord(k)[0], 0.5);
  EXPECT_DOUBLE_EQ(g.coord(k)[1], 2.0);
  EXPECT_TRUE(g.on_boundary(k));
  EXPECT_FALSE(g.on_boundary(g.index(2, 1)));
}

TEST(Grid, ScalarFieldValidation) {
  const Grid g = line(4);
  EXPECT_THROW(ScalarField(g, {1.0, 2.0}), DimensionMismatch);
  EXPECT_THROW(ScalarField(g, {1.0, 2.0, NAN, 0.0}), InvalidArgument);
  EXPECT_NO_THROW(ScalarField(g, {1.0, 2.0, 3.0, 0.0}));
}

TEST(Grid, DensityFieldValidation) {
  const Grid g(AxisSpec{0.0, 1.0, 3});
  EXPECT_THROW(DensityField(ScalarField(g, {1.0, 1.0, -0.1})), InvalidArgument);
  EXPECT_THROW(DensityField(ScalarField(g, {2.0, 2.0, 2.0})), InvalidArgument);
  EXPECT_NO_THROW(DensityField(ScalarField(g, {1.0, 1.0, 1.0})));
}

TEST(Integrate, ZeroField) {
  EXPECT_EQ(integrate(ScalarField::constant(square(7), 0.0)), 0.0);
}

TEST(Integrate, ConstantOnUnitInterval) {
  EXPECT_NEAR(integrate(ScalarField::constant(Grid(AxisSpec{0.0, 1.0, 11}), 1.0)), 1.0, 1e-15);
}

TEST(Integrate, LinearIsExact) {
  const Grid g(AxisSpec{0.0, 1.0, 101});
  EXPECT_NEAR(integrate(ScalarField::from_function(g, [](const Point& x) { return x[0]; })), 0.5, 1e-12);
}

TEST(Integrate, BilinearIsExact) {
  const Grid g(AxisSpec{0.0, 1.0, 9}, AxisSpec{0.0, 2.0, 5});
  const double got = integrate(ScalarField::from_function(g, [](const Point& x) { return x[0] * x[1] + 1.0; }));
  EXPECT_NEAR(got, 1.0 + 2.0, 1e-12);
}

TEST(Gradient, AffineIsExact) {
  const Grid g(AxisSpec{-1.0, 1.0, 9}, AxisSpec{0.0, 3.0, 7});
  const auto f = ScalarField::from_function(g, [](const Point& x) { return 0.7 * x[0] - 1.3 * x[1] + 2.0; });
  const auto d = gradient(f);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(d.at(k)[0], 0.7, 1e-12);
    EXPECT_NEAR(d.at(k)[1], -1.3, 1e-12);
  }
}

TEST(Gradient, ConstantIsExactlyZero) {
  const auto d = gradient(ScalarField::constant(square(6), 3.7));
  for (std::size_t k = 0; k < d.grid().size(); ++k) {
    EXPECT_EQ(d.at(k)[0], 0.0);
    EXPECT_EQ(d.at(k)[1], 0.0);
  }
}

TEST(Gradient, QuadraticInterior) {
  const Grid g = line(201);
  const auto d = gradient(ScalarField::from_function(g, [](const Point& x) { return x[0] * x[0]; }));
  for (std::size_t k = 1; k + 1 < g.size(); ++k) EXPECT_NEAR(d.at(k)[0], 2.0 * g.coord(k)[0], 1e-10);
  // One-sided second-order stencils are exact for quadratics too.
  EXPECT_NEAR(d.at(0)[0], -2.0, 1e-10);
  EXPECT_NEAR(d.at(200)[0], 2.0, 1e-10);
}

TEST(Gradient, NeedsThreeNodes) {
  EXPECT_THROW(gradient(ScalarField::constant(line(2), 1.0)), InvalidArgument);
}

TEST(Normalize, ConstantBecomesUniform) {
  const auto d = normalize(ScalarField::constant(Grid(AxisSpec{0.0, 1.0, 11}), 2.0));
  for (double x : d.values()) EXPECT_NEAR(x, 1.0, 1e-14);
}

TEST(Normalize, ClampsNegatives) {
  const Grid g(AxisSpec{0.0, 1.0, 5});
  const auto d = normalize(ScalarField(g, {1.0, -3.0, 1.0, 1.0, 1.0}));
  EXPECT_EQ(d[1], 0.0);
  EXPECT_NEAR(d[0] / d[2], 1.0, 1e-15);
  EXPECT_NEAR(integrate(d), 1.0, 1e-12);
}

TEST(Normalize, GaussianHasUnitMass) {
  const Grid g = line(300);
  const auto f = ScalarField::from_function(g, [](const Point& x) { return 5.0 * std::exp(-x[0] * x[0] / 0.02); });
  EXPECT_NEAR(integrate(normalize(f)), 1.0, 1e-10);
}

TEST(Normalize, AllZeroThrows) {
  EXPECT_THROW(normalize(ScalarField::constant(line(5), 0.0)), AllZero);
  EXPECT_THROW(normalize(ScalarField::constant(line(5), -1.0)), AllZero);
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 rng(7);
  const Grid g = square(9);
  const auto once = normalize(random_field(g, rng));
  const auto twice = normalize(once.field());
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(twice[k], once[k], 1e-14 * std::max(1.0, once[k]));
}

TEST(Interpolate, ReproducesBilinearFunctions) {
  const Grid g(AxisSpec{-1.0, 1.0, 6}, AxisSpec{0.0, 1.0, 4});
  auto f = [](const Point& x) { return 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]; };
  const auto s = ScalarField::from_function(g, f);
  for (const Point p : {Point{0.13, 0.77}, Point{-0.99, 0.01}, Point{0.5, 0.5}}) {
    EXPECT_NEAR(interpolate(s, p), f(p), 1e-13);
  }
  EXPECT_EQ(interpolate(s, Point{2.0, 0.5}, Outside::Zero), 0.0);
  EXPECT_NEAR(interpolate(s, Point{2.0, 0.5}), f({1.0, 0.5}), 1e-13);
}

TEST(Splat, ConservesMass) {
  const Grid g = square(8);
  std::vector<double> t(g.size(), 0.0);
  splat(t, g, Point{0.123, -0.456}, 2.5);
  splat(t, g, Point{5.0, 5.0}, 1.0);
  double sum = 0.0;
  for (double x : t) sum += x;
  EXPECT_NEAR(sum, 3.5, 1e-14);
  EXPECT_EQ(t[g.size() - 1], 1.0);
}

TEST(Mollify, PreservesConstantsAndSmooths) {
  const Grid g = line(41);
  const auto c = mollify(ScalarField::constant(g, 2.0), 0.2);
  for (double x : c.values()) EXPECT_NEAR(x, 2.0, 1e-14);
  std::vector<double> spike(g.size(), 0.0);
  spike[20] = 1.0;
  const auto m = mollify(ScalarField(g, spike), 0.2);
  EXPECT_LT(m[20], 1.0);
  EXPECT_GT(m[21], 0.0);
  EXPECT_NEAR(m[19], m[21], 1e-15);
  // Below one grid step the field is returned unchanged.
  const auto same = mollify(ScalarField(g, spike), 0.01);
  EXPECT_EQ(same.to_vector(), spike);
}

TEST(Norms, L1AndInner) {
  const Grid g(AxisSpec{0.0, 1.0, 3});
  const std::vector<double> a{1.0, 2.0, 3.0}, b{1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(l1_distance(a, b, g), 0.5 * 2.0 + 0.25 * 3.0);
  EXPECT_DOUBLE_EQ(inner(a, b, g), 0.25);
}
