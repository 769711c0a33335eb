#pragma once

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <string>

#include "torusheat/errors.hpp"

namespace torusheat {

// Adaptive double-exponential quadrature. tanh-sinh clusters nodes at the
// endpoints, so integrands with algebraic endpoint cusps (the parabolic
// time weights) converge as fast as smooth ones. The error estimate is
// verified afterwards: accepted when below abs_tol or below 1e-10 of the
// L1 mass, so a hopeless integrand fails loudly instead of returning
// garbage.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-9,
                 int max_levels = 15) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> rule(max_levels);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  double v = rule.integrate(f, a, b, 1e-12, &err, &l1, &levels);
  if (!(err <= abs_tol || err <= 1e-10 * l1)) {
    throw QuadratureFailure("integrate: error estimate " +
                            std::to_string(err) + " above tolerance " +
                            std::to_string(abs_tol));
  }
  return v;
}

}  // namespace torusheat
