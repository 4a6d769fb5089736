#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace mkflow;
using namespace testing_support;

TEST(TimeGrid, Levels) {
  const TimeGrid tg(4);
  const auto t = tg.times();
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_EQ(t.back(), 1.0);
  for (std::size_t k = 1; k < t.size(); ++k) EXPECT_GT(t[k], t[k - 1]);
  EXPECT_EQ(tg.remaining(0), 1.0);
  EXPECT_EQ(tg.dt(), 0.25);
  EXPECT_THROW(TimeGrid(0), InvalidArgument);
}

TEST(LaxHopf, ZeroData) {
  const Grid g = square(9);
  const auto traj = lax_hopf_solve(ScalarField::constant(g, 0.0), CostFunction(2.0), TimeGrid(3));
  ASSERT_EQ(traj.snapshots.size(), 4u);
  for (const auto& s : traj.snapshots) {
    for (double x : s.values()) EXPECT_EQ(x, 0.0);
  }
  for (double x : initial_potential(traj).values()) EXPECT_EQ(x, 0.0);
}

TEST(LaxHopf, LinearDataClosedForm1D) {
  // phi(t, x) = a x + (1 - t) a^2 / 2, maximiser x + (1 - t) a on the lattice.
  const Grid g = line(129);
  const double a = 0.25;
  const TimeGrid tg(4);
  const auto v = ScalarField::from_function(g, [&](const Point& y) { return a * y[0]; });
  const auto traj = lax_hopf_solve(v, CostFunction(2.0), tg);
  std::size_t checked = 0;
  for (std::size_t k = 0; k <= tg.steps(); ++k) {
    const double s = tg.remaining(k);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.coord(i)[0];
      if (x + s * a > 1.0 - 1e-12) continue;
      EXPECT_NEAR(traj.snapshots[k][i], a * x + s * a * a / 2.0, 1e-10);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500u);
}

TEST(LaxHopf, LinearDataClosedForm2D) {
  const Grid g = square(65);
  const Point a{0.25, -0.125};
  const TimeGrid tg(4);
  const auto v = ScalarField::from_function(g, [&](const Point& y) { return dot(a, y); });
  const auto traj = lax_hopf_solve(v, CostFunction(2.0), tg);
  for (std::size_t k = 0; k <= tg.steps(); ++k) {
    const double s = tg.remaining(k);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point x = g.coord(i);
      if (!g.contains({x[0] + s * a[0], x[1] + s * a[1]})) continue;
      EXPECT_NEAR(traj.snapshots[k][i], dot(a, x) + s * dot(a, a) / 2.0, 1e-10);
    }
  }
}

TEST(LaxHopf, TerminalSnapshotIsData) {
  std::mt19937_64 rng(1);
  const Grid g = square(12);
  const auto v = random_field(g, rng);
  const auto traj = lax_hopf_solve(v, CostFunction(3.0), TimeGrid(5));
  EXPECT_EQ(traj.terminal().to_vector(), v.to_vector());
}

TEST(LaxHopf, InitialPotentialIsCTransform) {
  std::mt19937_64 rng(2);
  for (double p : {1.5, 2.0, 3.0}) {
    for (const Grid& g : {line(77), square(13)}) {
      const auto v = random_field(g, rng);
      const CostFunction c(p);
      const auto traj = lax_hopf_solve(v, c, TimeGrid(3));
      const auto ct = c_transform(v, c, Direction::YToX);
      for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(-initial_potential(traj)[i], ct.value[i]);
    }
  }
}

TEST(LaxHopf, LinearDataInitialPotential) {
  // v = -b y gives -phi(0, x) = b x - b^2 / 2 where x - b stays inside.
  const Grid g = line(129);
  const double b = 0.25;
  const auto v = ScalarField::from_function(g, [&](const Point& y) { return -b * y[0]; });
  const auto traj = lax_hopf_solve(v, CostFunction(2.0), TimeGrid(2));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coord(i)[0];
    if (x - b < -1.0 + 1e-12) continue;
    EXPECT_NEAR(-initial_potential(traj)[i], b * x - b * b / 2.0, 1e-12);
  }
}

TEST(Velocity, ConstantPotentialGivesZero) {
  const Grid g = square(7);
  const auto traj = lax_hopf_solve(ScalarField::constant(g, 2.5), CostFunction(3.0), TimeGrid(2));
  for (std::size_t k = 0; k <= 2; ++k) {
    const auto vel = velocity(traj, k, CostFunction(3.0));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(norm(vel.at(i)), 0.0);
  }
  EXPECT_THROW(velocity(traj, 3, CostFunction(3.0)), InvalidArgument);
}

TEST(Velocity, LinearDataQuadraticCost) {
  const Grid g = square(65);
  const Point a{0.25, -0.125};
  const auto v = ScalarField::from_function(g, [&](const Point& y) { return dot(a, y); });
  const auto traj = lax_hopf_solve(v, CostFunction(2.0), TimeGrid(4));
  const auto vel = velocity(traj, 2, CostFunction(2.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.coord(i);
    // The stencil must sit where the closed form holds.
    if (std::abs(x[0]) > 0.6 || std::abs(x[1]) > 0.6) continue;
    EXPECT_NEAR(vel.at(i)[0], a[0], 1e-10);
    EXPECT_NEAR(vel.at(i)[1], a[1], 1e-10);
  }
}

TEST(Velocity, GeneralExponentAppliesConjugateGradient) {
  const Grid g = square(17);
  const Point a{0.5, -0.3};
  const CostFunction c(3.0);
  const auto v = ScalarField::from_function(g, [&](const Point& y) { return dot(a, y); });
  const auto traj = lax_hopf_solve(v, c, TimeGrid(2));
  const auto vel = velocity(traj, 2, c);  // terminal level, phi = v exactly
  const double scale = std::pow(norm(a), c.q() - 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(vel.at(i)[0], scale * a[0], 1e-12);
    EXPECT_NEAR(vel.at(i)[1], scale * a[1], 1e-12);
  }
}

TEST(HjResidual, ZeroAndLinearData) {
  const Grid g = line(129);
  const CostFunction c(2.0);
  EXPECT_EQ(hj_residual(lax_hopf_solve(ScalarField::constant(g, 0.0), c, TimeGrid(4)), c), 0.0);
  const auto v = ScalarField::from_function(g, [](const Point& y) { return 0.25 * y[0]; });
  EXPECT_LE(hj_residual(lax_hopf_solve(v, c, TimeGrid(4)), c), 1e-10);
  EXPECT_THROW(hj_residual(lax_hopf_solve(v, c, TimeGrid(1)), c), InvalidArgument);
}

TEST(HjResidual, DecreasesUnderRefinement) {
  const CostFunction c(2.0);
  std::vector<double> res;
  for (std::size_t n : {33u, 65u, 129u, 257u}) {
    const Grid g = line(n);
    const auto v = ScalarField::from_function(
        g, [](const Point& y) { return -0.5 * y[0] * y[0] + 0.05 * std::sin(3.0 * y[0]); });
    res.push_back(hj_residual(lax_hopf_solve(v, c, TimeGrid((n - 1) / 4)), c));
  }
  for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LT(res[i], res[i - 1]);
  EXPECT_LT(res.back(), 0.6 * res.front());
}

TEST(Semiconvexity, Examples) {
  const Grid g = line(41);
  const auto convex = ScalarField::from_function(g, [](const Point& x) { return x[0] * x[0] + std::exp(x[0]); });
  EXPECT_TRUE(semiconvexity_check(convex, 0.0));
  const auto neg = ScalarField::from_function(g, [](const Point& x) { return -x[0] * x[0]; });
  EXPECT_TRUE(semiconvexity_check(neg, 2.0));
  EXPECT_FALSE(semiconvexity_check(neg, 1.9));
  const Grid g2 = square(21);
  const auto neg2 = ScalarField::from_function(g2, [](const Point& x) { return -dot(x, x); });
  EXPECT_TRUE(semiconvexity_check(neg2, 2.0));
  EXPECT_FALSE(semiconvexity_check(neg2, 1.9));
}

TEST(LaxHopf, MonotoneInData) {
  std::mt19937_64 rng(7);
  const Grid g = square(11);
  const CostFunction c(2.0);
  const auto v2 = random_field(g, rng);
  std::vector<double> bumped = v2.to_vector();
  std::uniform_real_distribution<double> up(0.0, 0.5);
  for (double& x : bumped) x += up(rng);
  const auto t1 = lax_hopf_solve(ScalarField(g, bumped), c, TimeGrid(4));
  const auto t2 = lax_hopf_solve(v2, c, TimeGrid(4));
  for (std::size_t k = 0; k <= 4; ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_GE(t1.snapshots[k][i], t2.snapshots[k][i]);
  }
}

TEST(LaxHopf, SupNormStability) {
  std::mt19937_64 rng(8);
  const Grid g = line(64);
  const CostFunction c(3.0);
  const auto v = random_field(g, rng);
  const auto h = random_field(g, rng);
  double hsup = 0.0;
  for (double x : h.values()) hsup = std::max(hsup, std::abs(x));
  for (double tau : {1e-3, 0.1, 1.0}) {
    std::vector<double> vt = v.to_vector();
    for (std::size_t i = 0; i < vt.size(); ++i) vt[i] += tau * h[i];
    const auto a = lax_hopf_solve(v, c, TimeGrid(1));
    const auto b = lax_hopf_solve(ScalarField(g, vt), c, TimeGrid(1));
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LE(std::abs(a.snapshots[0][i] - b.snapshots[0][i]), tau * hsup * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST(LaxHopf, EnergyIdentityQuadraticCost) {
  // Space-time integral of |grad phi|^2 / 2 equals the integral of phi(0) - v.
  std::vector<double> gaps;
  for (std::size_t n : {65u, 129u, 257u}) {
    const Grid g = line(n);
    const TimeGrid tg((n - 1) / 2);
    const auto v = ScalarField::from_function(
        g, [](const Point& y) { return -0.5 * y[0] * y[0] + 0.05 * std::sin(3.0 * y[0]); });
    const auto traj = lax_hopf_solve(v, CostFunction(2.0), tg);
    std::vector<double> level(tg.steps() + 1);
    for (std::size_t k = 0; k <= tg.steps(); ++k) {
      const auto grad = gradient(traj.snapshots[k]);
      std::vector<double> e(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) e[i] = 0.5 * dot(grad.at(i), grad.at(i));
      level[k] = integrate(e, g);
    }
    double lhs = 0.0;
    for (std::size_t k = 0; k < tg.steps(); ++k) lhs += 0.5 * tg.dt() * (level[k] + level[k + 1]);
    std::vector<double> diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = initial_potential(traj)[i] - v[i];
    const double rhs = integrate(diff, g);
    EXPECT_NEAR(lhs, rhs, 0.05 * rhs);
    gaps.push_back(std::abs(lhs - rhs));
  }
  EXPECT_LT(gaps.back(), gaps.front());
}

TEST(LaxHopf, W1InfBound) {
  std::mt19937_64 rng(9);
  for (const Grid& g : {line(129), square(33)}) {
    const auto v = smooth_field(g, rng, 0.8);
    const auto traj = lax_hopf_solve(v, CostFunction(2.0), TimeGrid(8));
    const double bound = w1inf_norm(v);
    double vsup = 0.0;
    for (double x : v.values()) vsup = std::max(vsup, std::abs(x));
    for (const auto& s : traj.snapshots) {
      for (double x : s.values()) EXPECT_LE(std::abs(x), vsup + 1e-14);
      EXPECT_LE(w1inf_norm(s), bound * (1.0 + 1e-9));
    }
  }
}

TEST(LaxHopf, TrajectoryExport) {
  const auto dir = std::filesystem::temp_directory_path() / "mkflow_hj_export";
  std::filesystem::remove_all(dir);
  const Grid g = line(9);
  const auto traj = lax_hopf_solve(ScalarField::constant(g, 1.0), CostFunction(2.0), TimeGrid(2));
  write_trajectory(traj.snapshots, traj.time_grid, dir, "phi");
  std::ifstream in(dir / "phi.manifest");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "times: 0 0.5 1");
  for (int k = 0; k <= 2; ++k) {
    std::string name;
    std::getline(in, name);
    EXPECT_EQ(name, "phi_" + std::to_string(k) + ".field");
    EXPECT_EQ(read_field(dir / name).to_vector(), traj.snapshots[static_cast<std::size_t>(k)].to_vector());
  }
  std::filesystem::remove_all(dir);
}
