#include <gtest/gtest.h>

#include "support.hpp"

using namespace mkflow;
using namespace testing_support;

TEST(Cost, RejectsBadExponent) {
  EXPECT_THROW(CostFunction{1.0}, InvalidArgument);
  EXPECT_THROW(CostFunction{0.5}, InvalidArgument);
  EXPECT_THROW(CostFunction{INFINITY}, InvalidArgument);
  EXPECT_THROW(CostFunction{NAN}, InvalidArgument);
}

TEST(Cost, ConjugateExponent) {
  for (double p : {1.5, 2.0, 3.0, 4.5}) {
    const CostFunction c(p);
    EXPECT_NEAR(1.0 / c.p() + 1.0 / c.q(), 1.0, 1e-15);
  }
  EXPECT_EQ(CostFunction(3.0).q(), 1.5);
}

TEST(Cost, Eval) {
  EXPECT_EQ(CostFunction(2.0).eval({3.0, 4.0}), 12.5);
  EXPECT_NEAR(CostFunction(3.0).eval({2.0, 0.0}), 8.0 / 3.0, 1e-15);
  for (double p : {1.2, 2.0, 3.0}) EXPECT_EQ(CostFunction(p).eval({0.0, 0.0}), 0.0);
}

TEST(Cost, ConjEval) {
  EXPECT_EQ(CostFunction(2.0).conj_eval({1.0, 1.0}), 1.0);
  EXPECT_NEAR(CostFunction(3.0).conj_eval({4.0, 0.0}), 16.0 / 3.0, 1e-14);
  for (double p : {1.2, 2.0, 3.0}) EXPECT_EQ(CostFunction(p).conj_eval({0.0, 0.0}), 0.0);
}

TEST(Cost, ConjGrad) {
  const CostFunction quad(2.0);
  EXPECT_EQ(quad.conj_grad({0.3, -1.7}), (Point{0.3, -1.7}));
  const CostFunction c3(3.0);
  EXPECT_EQ(c3.conj_grad({0.0, 0.0}), (Point{0.0, 0.0}));
  EXPECT_NEAR(c3.conj_grad({4.0, 0.0})[0], 2.0, 1e-15);
}

TEST(Cost, CostGrad) {
  EXPECT_EQ(CostFunction(2.0).grad({1.5, 2.5}), (Point{1.5, 2.5}));
  EXPECT_EQ(CostFunction(1.5).grad({0.0, 0.0}), (Point{0.0, 0.0}));
  EXPECT_NEAR(CostFunction(4.0).grad({2.0, 0.0})[0], 8.0, 1e-14);
}

TEST(Cost, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    const CostFunction c(p);
    for (int trial = 0; trial < 20; ++trial) {
      const Point z{u(rng), u(rng)};
      const double e = 1e-6;
      for (std::size_t a = 0; a < 2; ++a) {
        Point zp = z, zm = z;
        zp[a] += e;
        zm[a] -= e;
        EXPECT_NEAR(c.grad(z)[a], (c.eval(zp) - c.eval(zm)) / (2 * e), 1e-6 * (1 + std::abs(c.grad(z)[a])));
        EXPECT_NEAR(c.conj_grad(z)[a], (c.conj_eval(zp) - c.conj_eval(zm)) / (2 * e),
                    1e-6 * (1 + std::abs(c.conj_grad(z)[a])));
      }
    }
  }
}

TEST(Cost, FenchelYoungEquality) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double p : {1.5, 2.0, 3.0, 5.0}) {
    const CostFunction c(p);
    for (int trial = 0; trial < 100; ++trial) {
      const Point y{u(rng), u(rng)};
      const Point x = c.conj_grad(y);
      const double lhs = c.eval(x) + c.conj_eval(y);
      const double rhs = dot(y, x);
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(Cost, GradientsAreMutuallyInverse) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double p : {1.5, 2.0, 3.0, 5.0}) {
    const CostFunction c(p);
    for (int trial = 0; trial < 100; ++trial) {
      const Point y{u(rng), u(rng)};
      const Point back = c.grad(c.conj_grad(y));
      for (std::size_t a = 0; a < 2; ++a) EXPECT_NEAR(back[a], y[a], 1e-8 * norm(y));
    }
  }
}

TEST(Cost, ConjugateMatchesLatticeSupremum) {
  // c*(y) = sup_x x.y - c(x), over a fine lattice covering the maximiser.
  for (double p : {1.5, 2.0, 3.0}) {
    const CostFunction c(p);
    for (const Point y : {Point{0.7, 0.0}, Point{-1.2, 0.5}, Point{0.3, -0.9}}) {
      const double step = 0.005;
      double best = -INFINITY;
      for (int i = -600; i <= 600; ++i) {
        for (int j = -600; j <= 600; ++j) {
          const Point x{i * step, j * step};
          best = std::max(best, dot(x, y) - c.eval(x));
        }
      }
      // The sup over a lattice of spacing s is within O(s^2 |D^2 c|) below.
      EXPECT_LE(best, c.conj_eval(y) + 1e-12);
      EXPECT_NEAR(best, c.conj_eval(y), 2e-3);
    }
  }
}
