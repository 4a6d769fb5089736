#pragma once

/**
 * @file ctransform.hpp
 * @brief Discrete c-conjugates by exhaustive node sweep.
 *
 * For a field u on the grid the c-transform is
 *   v(y) = min over nodes x of c(x - y) - u(x),
 * taken exactly over all nodes. The cost between two nodes only depends on
 * their index offset, so it is tabulated once per call. The same kernel
 * drives the Lax-Hopf evaluation in hj.hpp, which makes the identity
 * -phi(0, .) = c_transform(v) hold bit for bit.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mkflow/cost.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

namespace detail {

/// Table of scale * c(offset / scale) over all index offsets of a grid.
class OffsetCostTable {
 public:
  OffsetCostTable(const Grid& g, const CostFunction& cost, double scale = 1.0)
      : n0_(g.n(0)), n1_(g.dim() == 2 ? g.n(1) : 1), w1_(2 * n1_ - 1) {
    const double h0 = g.h(0);
    const double h1 = g.dim() == 2 ? g.h(1) : 0.0;
    table_.resize((2 * n0_ - 1) * w1_);
    for (std::size_t a = 0; a < 2 * n0_ - 1; ++a) {
      const double d0 = (static_cast<double>(a) - static_cast<double>(n0_ - 1)) * h0 / scale;
      for (std::size_t b = 0; b < w1_; ++b) {
        const double d1 = (static_cast<double>(b) - static_cast<double>(n1_ - 1)) * h1 / scale;
        table_[a * w1_ + b] = scale * cost.eval({d0, d1});
      }
    }
  }

  /// Pointer to the table row for axis-0 offset (i0 - j0); index it with
  /// (n1 - 1 + i1 - j1). The table is even: entry(-d) == entry(d) exactly.
  [[nodiscard]] const double* row(std::size_t i0, std::size_t j0) const {
    return table_.data() + (n0_ - 1 + i0 - j0) * w1_;
  }

 private:
  std::size_t n0_, n1_, w1_;
  std::vector<double> table_;
};

/**
 * out[o] = max over nodes k of (f[k] - table(o - k)), with arg[o] the lowest
 * maximising node index. Each output node is an independent serial
 * reduction, so the result does not depend on the thread schedule.
 */
inline void sup_convolution(std::span<const double> f, const Grid& g, const OffsetCostTable& table,
                            std::span<double> out, std::span<std::size_t> arg) {
  const std::size_t n0 = g.n(0);
  const std::size_t n1 = g.dim() == 2 ? g.n(1) : 1;
  const auto total = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t os = 0; os < total; ++os) {
    const auto o = static_cast<std::size_t>(os);
    const std::size_t i0 = o / n1;
    const std::size_t i1 = o % n1;
    // Two passes: a branch-free maximum, then the first node attaining it.
    // Both evaluate the same expression, so the located node is exactly the
    // lowest-index maximiser. The table is symmetric under negating the
    // offset, which lets both passes read it forward.
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    if (n1 == 1) {
      const double* t = table.row(0, i0);
      const double* fp = f.data();
#pragma omp simd reduction(max : best)
      for (std::size_t j = 0; j < n0; ++j) {
        const double val = fp[j] - t[j];
        best = val > best ? val : best;
      }
      while (fp[best_k] - t[best_k] != best) ++best_k;
    } else {
      for (std::size_t j0 = 0; j0 < n0; ++j0) {
        const double* trow = table.row(j0, i0) + (n1 - 1 - i1);
        const double* frow = f.data() + j0 * n1;
#pragma omp simd reduction(max : best)
        for (std::size_t j1 = 0; j1 < n1; ++j1) {
          const double val = frow[j1] - trow[j1];
          best = val > best ? val : best;
        }
      }
      for (std::size_t j0 = 0, found = 0; j0 < n0 && !found; ++j0) {
        const double* trow = table.row(j0, i0) + (n1 - 1 - i1);
        const double* frow = f.data() + j0 * n1;
        for (std::size_t j1 = 0; j1 < n1; ++j1) {
          if (frow[j1] - trow[j1] == best) {
            best_k = j0 * n1 + j1;
            found = 1;
            break;
          }
        }
      }
    }
    out[o] = best;
    arg[o] = best_k;
  }
}

}  // namespace detail

enum class Direction {
  XToY,  ///< v(y) = min_x c(x - y) - u(x)
  YToX,  ///< u(x) = min_y c(x - y) - v(y)
};

struct CTransformResult {
  ScalarField value;
  /// Index of the lowest-index minimising node for every output node.
  std::vector<std::size_t> argmin;
  /// 1 where the minimiser lies on the box boundary; the transform there is
  /// biased by truncation of the domain.
  std::vector<std::uint8_t> boundary_attained;
};

/// Exact discrete c-transform. The cost is radial, so both directions
/// evaluate the same sweep; the direction only names which variable is
/// minimised over.
inline CTransformResult c_transform(const ScalarField& u, const CostFunction& cost,
                                    Direction direction = Direction::XToY) {
  (void)direction;
  const Grid& g = u.grid();
  const detail::OffsetCostTable table(g, cost);
  std::vector<double> sup(g.size());
  std::vector<std::size_t> arg(g.size());
  detail::sup_convolution(u.values(), g, table, sup, arg);
  std::vector<std::uint8_t> boundary(g.size());
  for (std::size_t k = 0; k < sup.size(); ++k) {
    sup[k] = -sup[k];
    boundary[k] = g.on_boundary(arg[k]) ? 1 : 0;
  }
  return {ScalarField(g, std::move(sup)), std::move(arg), std::move(boundary)};
}

/**
 * Bi-c-conjugate: the smallest c-concave majorant of u.
 *
 * In exact arithmetic (u^c)^c >= u, with equality exactly where u is
 * already c-concave. Two rounded sweeps can overshoot u by a few ulps of the
 * magnitudes involved, so a node is raised to (u^c)^c only when the excess
 * is above that rounding bound. The result dominates u exactly, leaves a
 * c-concave field untouched, and a second application changes nothing.
 */
inline ScalarField bi_conjugate(const ScalarField& u, const CostFunction& cost) {
  const Grid& g = u.grid();
  const detail::OffsetCostTable table(g, cost);
  std::vector<double> uc(g.size());
  std::vector<double> ucc(g.size());
  std::vector<std::size_t> arg(g.size());
  detail::sup_convolution(u.values(), g, table, uc, arg);
  for (double& t : uc) t = -t;
  detail::sup_convolution(uc, g, table, ucc, arg);
  for (double& b : ucc) b = -b;

  auto sup_abs = [](std::span<const double> f) {
    double m = 0.0;
    for (double x : f) m = std::max(m, std::abs(x));
    return m;
  };
  const double tol = 16.0 * std::numeric_limits<double>::epsilon() *
                     (sup_abs(u.values()) + 2.0 * sup_abs(uc) + sup_abs(ucc));
  std::vector<double> out = u.to_vector();
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (ucc[k] > out[k] + tol) out[k] = ucc[k];
  }
  return {g, std::move(out)};
}

}  // namespace mkflow
