#pragma once

#include <cmath>
#include <string>

#include "mkflow/error.hpp"
#include "mkflow/grid.hpp"

namespace mkflow {

/**
 * Radial power cost c(z) = |z|^p / p and its convex conjugate
 * c*(y) = |y|^q / q with 1/p + 1/q = 1.
 *
 * The gradients |z|^{p-2} z and |y|^{q-2} y are inverse maps of each other.
 * Both are defined as zero at the origin, which for exponents below 2 is the
 * minimal-norm element of the subdifferential.
 */
class CostFunction {
 public:
  explicit CostFunction(double p = 2.0) : p_(p) {
    if (!(std::isfinite(p) && p > 1.0)) throw InvalidArgument("cost exponent p must be finite and > 1");
    q_ = p_ / (p_ - 1.0);
  }

  [[nodiscard]] double p() const { return p_; }
  [[nodiscard]] double q() const { return q_; }
  [[nodiscard]] bool quadratic() const { return p_ == 2.0; }

  [[nodiscard]] double eval(const Point& z) const { return power_over(dot(z, z), p_); }
  [[nodiscard]] double conj_eval(const Point& y) const { return power_over(dot(y, y), q_); }

  [[nodiscard]] Point grad(const Point& z) const { return power_grad(z, p_); }
  [[nodiscard]] Point conj_grad(const Point& y) const { return power_grad(y, q_); }

  /// Scalar version of eval for a displacement given by its squared length.
  [[nodiscard]] double eval_sq(double r2) const { return power_over(r2, p_); }

 private:
  // |z|^e / e from r2 = |z|^2.
  static double power_over(double r2, double e) {
    if (e == 2.0) return 0.5 * r2;
    if (r2 == 0.0) return 0.0;
    return std::pow(r2, 0.5 * e) / e;
  }

  static Point power_grad(const Point& z, double e) {
    if (e == 2.0) return z;
    const double r = norm(z);
    if (r == 0.0) return {0.0, 0.0};
    const double s = std::pow(r, e - 2.0);
    return {s * z[0], s * z[1]};
  }

  double p_;
  double q_;
};

}  // namespace mkflow
