#pragma once

/**
 * @file grid.hpp
 * @brief Node-centred tensor grids on a box and the fields that live on them.
 *
 * Every field is sampled at grid nodes and stored row-major with axis 0 as
 * the slowest index. Integrals use the tensor trapezoid rule, so the
 * quadrature weight of a node is the product of per-axis weights (h, or h/2
 * on the two end nodes). The same weights serve as control-volume sizes for
 * the finite-volume transport solver, which is what makes discrete mass equal
 * to the trapezoid integral.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mkflow/error.hpp"

namespace mkflow {

/// A point or vector in R^d, d <= 2. Unused trailing components are zero,
/// so Euclidean norms are correct in one dimension without special cases.
using Point = std::array<double, 2>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Point& a) { return std::hypot(a[0], a[1]); }

struct AxisSpec {
  double min = 0.0;
  double max = 1.0;
  std::size_t n = 2;

  [[nodiscard]] double spacing() const { return (max - min) / static_cast<double>(n - 1); }
  [[nodiscard]] double coord(std::size_t i) const {
    return i + 1 == n ? max : min + static_cast<double>(i) * spacing();
  }
  /// Trapezoid weight of node i along this axis.
  [[nodiscard]] double weight(std::size_t i) const {
    const double h = spacing();
    return (i == 0 || i + 1 == n) ? 0.5 * h : h;
  }

  friend bool operator==(const AxisSpec&, const AxisSpec&) = default;
};

class Grid {
 public:
  Grid() : Grid(AxisSpec{}) {}

  explicit Grid(AxisSpec a0) : dim_(1), axes_{a0, AxisSpec{0.0, 1.0, 1}} { validate(); }

  Grid(AxisSpec a0, AxisSpec a1) : dim_(2), axes_{a0, a1} { validate(); }

  static Grid from_axes(std::span<const AxisSpec> axes) {
    if (axes.size() == 1) return Grid(axes[0]);
    if (axes.size() == 2) return Grid(axes[0], axes[1]);
    throw InvalidArgument("grid dimension must be 1 or 2, got " + std::to_string(axes.size()));
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const AxisSpec& axis(int a) const { return axes_[static_cast<std::size_t>(a)]; }
  [[nodiscard]] std::size_t n(int a) const { return axis(a).n; }
  [[nodiscard]] double h(int a) const { return axis(a).spacing(); }
  [[nodiscard]] std::size_t size() const { return axes_[0].n * axes_[1].n; }

  /// Stride of axis a in the row-major layout.
  [[nodiscard]] std::size_t stride(int a) const { return a == 0 ? axes_[1].n : 1; }

  [[nodiscard]] std::size_t index(std::size_t i0, std::size_t i1 = 0) const {
    return i0 * axes_[1].n + i1;
  }
  [[nodiscard]] std::array<std::size_t, 2> multi_index(std::size_t k) const {
    return {k / axes_[1].n, k % axes_[1].n};
  }

  [[nodiscard]] Point coord(std::size_t k) const {
    const auto [i0, i1] = multi_index(k);
    return {axes_[0].coord(i0), dim_ == 2 ? axes_[1].coord(i1) : 0.0};
  }

  [[nodiscard]] double weight(std::size_t k) const {
    const auto [i0, i1] = multi_index(k);
    return dim_ == 2 ? axes_[0].weight(i0) * axes_[1].weight(i1) : axes_[0].weight(i0);
  }

  [[nodiscard]] std::vector<double> weights() const {
    std::vector<double> w(size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = weight(k);
    return w;
  }

  [[nodiscard]] double volume() const {
    double v = axes_[0].max - axes_[0].min;
    if (dim_ == 2) v *= axes_[1].max - axes_[1].min;
    return v;
  }

  /// Smallest spacing over all axes.
  [[nodiscard]] double min_spacing() const {
    return dim_ == 2 ? std::min(h(0), h(1)) : h(0);
  }

  [[nodiscard]] bool on_boundary(std::size_t k) const {
    const auto [i0, i1] = multi_index(k);
    if (i0 == 0 || i0 + 1 == axes_[0].n) return true;
    return dim_ == 2 && (i1 == 0 || i1 + 1 == axes_[1].n);
  }

  /// Displacement between two nodes computed from the index offset, so it is
  /// exactly antisymmetric and translation invariant.
  [[nodiscard]] Point offset(std::size_t from, std::size_t to) const {
    const auto a = multi_index(from);
    const auto b = multi_index(to);
    const auto d0 = static_cast<double>(static_cast<long long>(b[0]) - static_cast<long long>(a[0]));
    const auto d1 = static_cast<double>(static_cast<long long>(b[1]) - static_cast<long long>(a[1]));
    return {d0 * h(0), dim_ == 2 ? d1 * h(1) : 0.0};
  }

  /// Clamp a point into the box. Returns true when clamping changed it.
  bool clamp(Point& x) const {
    bool clipped = false;
    for (int a = 0; a < dim_; ++a) {
      auto& c = x[static_cast<std::size_t>(a)];
      if (c < axis(a).min) { c = axis(a).min; clipped = true; }
      if (c > axis(a).max) { c = axis(a).max; clipped = true; }
    }
    return clipped;
  }

  [[nodiscard]] bool contains(const Point& x) const {
    for (int a = 0; a < dim_; ++a) {
      if (x[static_cast<std::size_t>(a)] < axis(a).min || x[static_cast<std::size_t>(a)] > axis(a).max) return false;
    }
    return true;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    if (a.dim_ != b.dim_) return false;
    return a.dim_ == 1 ? a.axes_[0] == b.axes_[0] : a.axes_ == b.axes_;
  }

 private:
  void validate() const {
    for (int a = 0; a < dim_; ++a) {
      const auto& ax = axes_[static_cast<std::size_t>(a)];
      if (!(std::isfinite(ax.min) && std::isfinite(ax.max)) || !(ax.max > ax.min)) {
        throw InvalidArgument("axis " + std::to_string(a) + ": max must exceed min");
      }
      if (ax.n < 2) throw InvalidArgument("axis " + std::to_string(a) + ": need at least 2 nodes");
    }
  }

  int dim_;
  std::array<AxisSpec, 2> axes_;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw DimensionMismatch(std::string(what) + ": fields live on different grids");
}

class ScalarField {
 public:
  ScalarField() = default;

  ScalarField(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw DimensionMismatch("field has " + std::to_string(values_.size()) + " values, grid has " +
                              std::to_string(grid_.size()) + " nodes");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("field values must be finite");
    }
  }

  static ScalarField constant(const Grid& grid, double value) {
    return {grid, std::vector<double>(grid.size(), value)};
  }

  static ScalarField from_function(const Grid& grid, const std::function<double(const Point&)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.coord(k));
    return {grid, std::move(v)};
  }

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t k) const { return values_[k]; }

  [[nodiscard]] double max() const { return *std::max_element(values_.begin(), values_.end()); }
  [[nodiscard]] double min() const { return *std::min_element(values_.begin(), values_.end()); }

  /// Copy of the values, for building a derived field.
  [[nodiscard]] std::vector<double> to_vector() const { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Nonnegative field of unit trapezoid mass.
class DensityField {
 public:
  static constexpr double kMassTolerance = 1e-10;

  DensityField() = default;

  /// Validates an already-normalised field; use normalize() for raw data.
  explicit DensityField(ScalarField inner) : inner_(std::move(inner)) {
    double mass = 0.0;
    for (std::size_t k = 0; k < inner_.size(); ++k) {
      if (inner_[k] < 0.0) throw InvalidArgument("density has a negative value at node " + std::to_string(k));
      mass += inner_.grid().weight(k) * inner_[k];
    }
    if (std::abs(mass - 1.0) > kMassTolerance) {
      throw InvalidArgument("density mass is " + std::to_string(mass) + ", expected 1 (normalize the input)");
    }
  }

  [[nodiscard]] const ScalarField& field() const { return inner_; }
  [[nodiscard]] const Grid& grid() const { return inner_.grid(); }
  [[nodiscard]] std::span<const double> values() const { return inner_.values(); }
  [[nodiscard]] std::size_t size() const { return inner_.size(); }
  [[nodiscard]] double operator[](std::size_t k) const { return inner_[k]; }

 private:
  ScalarField inner_;
};

class VectorField {
 public:
  VectorField() = default;

  VectorField(Grid grid, std::array<std::vector<double>, 2> components)
      : grid_(std::move(grid)), components_(std::move(components)) {
    for (int a = 0; a < grid_.dim(); ++a) {
      const auto& c = components_[static_cast<std::size_t>(a)];
      if (c.size() != grid_.size()) throw DimensionMismatch("vector component size does not match grid");
      for (double v : c) {
        if (!std::isfinite(v)) throw InvalidArgument("vector field values must be finite");
      }
    }
    if (grid_.dim() == 1) components_[1].assign(grid_.size(), 0.0);
  }

  static VectorField zeros(const Grid& grid) {
    return {grid, {std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)}};
  }

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] std::span<const double> component(int a) const { return components_[static_cast<std::size_t>(a)]; }
  [[nodiscard]] Point at(std::size_t k) const { return {components_[0][k], components_[1][k]}; }

  [[nodiscard]] ScalarField component_field(int a) const {
    return {grid_, components_[static_cast<std::size_t>(a)]};
  }

 private:
  Grid grid_;
  std::array<std::vector<double>, 2> components_;
};

/// Tensor trapezoid rule over the whole box. Sums in node order.
inline double integrate(std::span<const double> values, const Grid& grid) {
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) sum += grid.weight(k) * values[k];
  return sum;
}

inline double integrate(const ScalarField& f) { return integrate(f.values(), f.grid()); }
inline double integrate(const DensityField& f) { return integrate(f.field()); }

namespace detail {

/// Derivative along one axis into `out`: centred differences in the
/// interior, second-order one-sided differences on the two end nodes.
inline void axis_derivative(std::span<const double> f, const Grid& grid, int a, std::span<double> out) {
  const std::size_t n = grid.n(a);
  const std::size_t st = grid.stride(a);
  const double h = grid.h(a);
  const std::size_t lines = grid.size() / n;
  for (std::size_t line = 0; line < lines; ++line) {
    // Base index of this 1D line: for axis 0 the line runs over i0 with fixed
    // i1 = line; for axis 1 over i1 with fixed i0 = line.
    const std::size_t base = a == 0 ? line : line * n;
    auto at = [&](std::size_t i) { return f[base + i * st]; };
    for (std::size_t i = 1; i + 1 < n; ++i) out[base + i * st] = (at(i + 1) - at(i - 1)) / (2.0 * h);
    if (n >= 3) {
      out[base] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      out[base + (n - 1) * st] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    } else {
      const double d = (at(1) - at(0)) / h;
      out[base] = d;
      out[base + st] = d;
    }
  }
}

}  // namespace detail

inline VectorField gradient(const ScalarField& f) {
  const Grid& g = f.grid();
  for (int a = 0; a < g.dim(); ++a) {
    if (g.n(a) < 3) throw InvalidArgument("gradient needs at least 3 nodes per axis");
  }
  std::array<std::vector<double>, 2> comps{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  for (int a = 0; a < g.dim(); ++a) detail::axis_derivative(f.values(), g, a, comps[static_cast<std::size_t>(a)]);
  return {g, std::move(comps)};
}

/// Clamps negative samples to zero and rescales to unit trapezoid mass.
inline DensityField normalize(const ScalarField& f) {
  std::vector<double> v = f.to_vector();
  for (double& x : v) x = std::max(x, 0.0);
  const double mass = integrate(v, f.grid());
  if (!(mass > 0.0)) throw AllZero("cannot normalize: no positive mass after clamping");
  for (double& x : v) x /= mass;
  return DensityField(ScalarField(f.grid(), std::move(v)));
}

/**
 * Separable smoothing with a triangular kernel of half-width `width` (domain
 * units) along each axis. Kernel weights are renormalised where the support
 * leaves the box. A width below one grid step returns the field unchanged.
 */
inline ScalarField mollify(const ScalarField& f, double width) {
  const Grid& g = f.grid();
  std::vector<double> cur = f.to_vector();
  std::vector<double> next(cur.size());
  for (int a = 0; a < g.dim(); ++a) {
    const double h = g.h(a);
    const auto r = static_cast<std::size_t>(std::floor(width / h));
    if (r == 0) continue;
    std::vector<double> kernel(r + 1);
    for (std::size_t j = 0; j <= r; ++j) kernel[j] = 1.0 - static_cast<double>(j) * h / width;
    const std::size_t n = g.n(a);
    const std::size_t st = g.stride(a);
    const std::size_t lines = g.size() / n;
    for (std::size_t line = 0; line < lines; ++line) {
      const std::size_t base = a == 0 ? line : line * n;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        double wsum = 0.0;
        const std::size_t lo = i >= r ? i - r : 0;
        const std::size_t hi = std::min(n - 1, i + r);
        for (std::size_t j = lo; j <= hi; ++j) {
          const double kw = kernel[j > i ? j - i : i - j];
          acc += kw * cur[base + j * st];
          wsum += kw;
        }
        next[base + i * st] = acc / wsum;
      }
    }
    std::swap(cur, next);
  }
  return {g, std::move(cur)};
}

enum class Outside { Clamp, Zero };

/// Multilinear interpolation at an arbitrary point.
inline double interpolate(std::span<const double> f, const Grid& g, Point x, Outside outside = Outside::Clamp) {
  if (!g.contains(x)) {
    if (outside == Outside::Zero) return 0.0;
    g.clamp(x);
  }
  std::array<std::size_t, 2> lo{0, 0};
  std::array<double, 2> t{0.0, 0.0};
  for (int a = 0; a < g.dim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double s = (x[ua] - g.axis(a).min) / g.h(a);
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= g.n(a)) i = g.n(a) - 2;
    lo[ua] = i;
    t[ua] = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
  }
  if (g.dim() == 1) return (1.0 - t[0]) * f[lo[0]] + t[0] * f[lo[0] + 1];
  const std::size_t k = g.index(lo[0], lo[1]);
  const std::size_t s0 = g.stride(0);
  return (1.0 - t[0]) * ((1.0 - t[1]) * f[k] + t[1] * f[k + 1]) +
         t[0] * ((1.0 - t[1]) * f[k + s0] + t[1] * f[k + s0 + 1]);
}

inline double interpolate(const ScalarField& f, const Point& x, Outside outside = Outside::Clamp) {
  return interpolate(f.values(), f.grid(), x, outside);
}

/// Deposits `mass` at x onto the surrounding nodes with multilinear weights
/// (x is clamped into the box first).
inline void splat(std::span<double> target, const Grid& g, Point x, double mass) {
  g.clamp(x);
  std::array<std::size_t, 2> lo{0, 0};
  std::array<double, 2> t{0.0, 0.0};
  for (int a = 0; a < g.dim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double s = (x[ua] - g.axis(a).min) / g.h(a);
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= g.n(a)) i = g.n(a) - 2;
    lo[ua] = i;
    t[ua] = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
  }
  if (g.dim() == 1) {
    target[lo[0]] += (1.0 - t[0]) * mass;
    target[lo[0] + 1] += t[0] * mass;
    return;
  }
  const std::size_t k = g.index(lo[0], lo[1]);
  const std::size_t s0 = g.stride(0);
  target[k] += (1.0 - t[0]) * (1.0 - t[1]) * mass;
  target[k + 1] += (1.0 - t[0]) * t[1] * mass;
  target[k + s0] += t[0] * (1.0 - t[1]) * mass;
  target[k + s0 + 1] += t[0] * t[1] * mass;
}

/// Weighted L1 norm of a - b.
inline double l1_distance(std::span<const double> a, std::span<const double> b, const Grid& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += g.weight(k) * std::abs(a[k] - b[k]);
  return s;
}

/// Weighted L2 inner product.
inline double inner(std::span<const double> a, std::span<const double> b, const Grid& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += g.weight(k) * a[k] * b[k];
  return s;
}

}  // namespace mkflow
