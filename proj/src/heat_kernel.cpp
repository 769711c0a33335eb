#include "torusheat/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "torusheat/errors.hpp"
#include "torusheat/quadrature.hpp"
#include "torusheat/torus.hpp"

namespace torusheat {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPiSq = kPi * kPi;
// The image sum converges faster below this time scale, the Fourier sum
// above it (both are fine in a wide band around it).
constexpr double kRepSwitch = 1.0 / kPiSq;

double gauss_bump(double r, double v) {
  return std::exp(-v * v / (4.0 * r)) / std::sqrt(4.0 * kPi * r);
}

// sum_{n>=1} cos(pi n d) / (2 pi^2 n^2) in closed form for d in [0, 2]
// (cosine series of a quadratic polynomial).
double mode_weight_closed_form(double d) {
  return 1.0 / 12.0 - d / 4.0 + d * d / 8.0;
}

// int_0^tau gauss_bump(u, a) du for a >= 0, via the antiderivative
// sqrt(tau/pi) e^{-a^2/(4 tau)} - (a/2) erfc(a / (2 sqrt(tau))).
double heat_time_integral(double a, double tau) {
  if (tau <= 0.0) return 0.0;
  double root = std::sqrt(tau);
  if (a == 0.0) return root / std::sqrt(kPi);
  double z = a / (2.0 * root);
  return root / std::sqrt(kPi) * std::exp(-z * z) - 0.5 * a * std::erfc(z);
}

// Tracks term spend and accumulated tail bounds across the sub-series of a
// composite closed form.
struct SeriesBudget {
  double abs_tol;
  long max_terms;
  long used = 0;
  double tail = 0.0;

  explicit SeriesBudget(const SeriesTruncation* trunc) {
    SeriesTruncation defaults;
    abs_tol = trunc ? trunc->abs_tol : defaults.abs_tol;
    max_terms = trunc ? trunc->max_terms : defaults.max_terms;
    if (!(abs_tol > 0.0) || max_terms < 1) {
      throw std::invalid_argument(
          "SeriesTruncation: need abs_tol > 0 and max_terms >= 1");
    }
  }

  void spend(long n, const char* what) {
    used += n;
    if (used > max_terms) {
      std::ostringstream msg;
      msg << what << ": exceeded max_terms=" << max_terms
          << " before reaching abs_tol=" << abs_tol;
      throw TruncationFailure(msg.str());
    }
  }

  void write_back(SeriesTruncation* trunc) const {
    if (trunc) {
      trunc->terms_used = used;
      trunc->tail_bound = tail;
    }
  }
};

// Image representation; w is the wrapped displacement in [-1, 1). The
// discarded images sit at |w + 2n| >= 2N - 1, giving the tail bound
// 2 gauss_bump(r, 2N-1) + erfc((2N-1) / (2 sqrt r)) / 2.
double image_sum(double r, double w, SeriesBudget& budget) {
  double acc = gauss_bump(r, w);
  budget.spend(1, "kernel image sum");
  for (long n = 1;; ++n) {
    double edge = 2.0 * n - 1.0;
    double tail = 2.0 * gauss_bump(r, edge) +
                  0.5 * std::erfc(edge / (2.0 * std::sqrt(r)));
    if (tail <= budget.abs_tol) {
      budget.tail += tail;
      return acc;
    }
    acc += gauss_bump(r, w + 2.0 * n) + gauss_bump(r, w - 2.0 * n);
    budget.spend(2, "kernel image sum");
  }
}

// Fourier representation; after the n-th term the remainder is bounded by
// the leading discarded term times a geometric correction.
double fourier_sum(double r, double w, SeriesBudget& budget) {
  double acc = 0.5;
  budget.spend(1, "kernel Fourier sum");
  for (long n = 1;; ++n) {
    acc += std::cos(kPi * n * w) * std::exp(-kPiSq * double(n) * n * r);
    budget.spend(1, "kernel Fourier sum");
    double head = std::exp(-kPiSq * (n + 1.0) * (n + 1.0) * r);
    double ratio = std::exp(-kPiSq * (2.0 * n + 3.0) * r);
    double tail = head / (1.0 - ratio);
    if (tail <= budget.abs_tol) {
      budget.tail += tail;
      return acc;
    }
  }
}

double kernel_dispatch(double r, double w, SeriesBudget& budget) {
  return r >= kRepSwitch ? fourier_sum(r, w, budget) : image_sum(r, w, budget);
}

// F(d, tau) = sum_{n>=1} cos(pi n d) e^{-pi^2 n^2 tau} / (2 pi^2 n^2),
// the building block of every second-moment closed form below. For
// tau = 0 it has the polynomial value mode_weight_closed_form(d). For
// small tau the series converges too slowly term-by-term, but
// dF/dtau = 1/4 - G_tau(d)/2, so integrating the image representation of
// the kernel from 0 gives
//   F(d, tau) = F(d, 0) + tau/4 - (1/2) sum_n int_0^tau gauss_bump(u, d+2n) du
// with exponentially small image corrections. Requires d in [0, 1].
double theta_mode_sum(double d, double tau, SeriesBudget& budget) {
  if (tau == 0.0) return mode_weight_closed_form(d);
  if (tau >= kRepSwitch) {
    double acc = 0.0;
    for (long n = 1;; ++n) {
      double nn = double(n) * n;
      acc += std::cos(kPi * n * d) * std::exp(-kPiSq * nn * tau) /
             (2.0 * kPiSq * nn);
      budget.spend(1, "theta mode sum");
      double m = n + 1.0;
      double head = std::exp(-kPiSq * m * m * tau) / (2.0 * kPiSq * m * m);
      double tail = head / (1.0 - std::exp(-kPiSq * (2.0 * n + 3.0) * tau));
      if (tail <= budget.abs_tol) {
        budget.tail += tail;
        return acc;
      }
    }
  }
  double time_integral = heat_time_integral(d, tau);
  budget.spend(1, "theta image integral");
  for (long n = 1;; ++n) {
    double edge = 2.0 * n - 1.0;
    double tail = 2.0 * std::sqrt(tau / kPi) *
                  std::exp(-edge * edge / (4.0 * tau)) /
                  (1.0 - std::exp(-2.0 * n / tau));
    if (tail <= 2.0 * budget.abs_tol) {
      budget.tail += 0.5 * tail;
      break;
    }
    time_integral += heat_time_integral(d + 2.0 * n, tau) +
                     heat_time_integral(2.0 * n - d, tau);
    budget.spend(2, "theta image integral");
  }
  return mode_weight_closed_form(d) + tau / 4.0 - 0.5 * time_integral;
}

void require_nonnegative_time(double t, const char* what) {
  if (!(t >= 0.0)) {
    std::ostringstream msg;
    msg << what << ": need time >= 0, got " << t;
    throw std::invalid_argument(msg.str());
  }
}

void require_positive_time(double r, const char* what) {
  if (!(r > 0.0)) {
    std::ostringstream msg;
    msg << what << ": need time > 0, got " << r;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

double kernel_image_sum(double r, double a, double b,
                        SeriesTruncation* trunc) {
  require_positive_time(r, "kernel_image_sum");
  SeriesBudget budget(trunc);
  double v = image_sum(r, torus_wrap(a - b), budget);
  budget.write_back(trunc);
  return v;
}

double kernel_fourier(double r, double a, double b, SeriesTruncation* trunc) {
  require_positive_time(r, "kernel_fourier");
  SeriesBudget budget(trunc);
  double v = fourier_sum(r, torus_wrap(a - b), budget);
  budget.write_back(trunc);
  return v;
}

double kernel_value(double r, double a, double b, SeriesTruncation* trunc) {
  require_positive_time(r, "kernel_value");
  SeriesBudget budget(trunc);
  double v = kernel_dispatch(r, torus_wrap(a - b), budget);
  budget.write_back(trunc);
  return v;
}

std::vector<SupBoundsRow> kernel_sup_bounds_check(
    const std::vector<double>& t_grid) {
  std::vector<SupBoundsRow> rows;
  rows.reserve(t_grid.size());
  for (double t : t_grid) {
    require_positive_time(t, "kernel_sup_bounds_check");
    double sup = kernel_value(t, 0.0, 0.0);
    double scale = std::max(1.0 / std::sqrt(t), 1.0);
    SupBoundsRow row{t, sup, 0.25 * scale, 2.0 * scale};
    const int kGrid = 64;
    double prev = sup;
    for (int k = 1; k <= kGrid; ++k) {
      double d = double(k) / kGrid;
      double v = kernel_value(t, d, 0.0);
      if (v > prev + 1e-12) {
        std::ostringstream msg;
        msg << "kernel_sup_bounds_check: G_t not decreasing in distance at t="
            << t << ", d=" << d;
        throw BoundViolation(msg.str());
      }
      prev = v;
    }
    if (!(row.lower <= sup && sup <= row.upper)) {
      std::ostringstream msg;
      msg << "kernel_sup_bounds_check: sup bound failed at t=" << t
          << ": lower=" << row.lower << " sup=" << sup
          << " upper=" << row.upper;
      throw BoundViolation(msg.str());
    }
    rows.push_back(row);
  }
  return rows;
}

double variance_of_H(double t, SeriesTruncation* trunc) {
  require_nonnegative_time(t, "variance_of_H");
  SeriesBudget budget(trunc);
  double v = 0.0;
  if (t > 0.0) {
    v = t / 2.0 + mode_weight_closed_form(0.0) -
        theta_mode_sum(0.0, 2.0 * t, budget);
  }
  budget.write_back(trunc);
  return v;
}

double covariance_of_H(double t, double x, double s, double y,
                       SeriesTruncation* trunc) {
  require_nonnegative_time(t, "covariance_of_H");
  require_nonnegative_time(s, "covariance_of_H");
  SeriesBudget budget(trunc);
  double v = 0.0;
  if (t > 0.0 && s > 0.0) {
    double d = torus_dist(x, y);
    v = std::min(s, t) / 2.0 + theta_mode_sum(d, std::abs(t - s), budget) -
        theta_mode_sum(d, t + s, budget);
  }
  budget.write_back(trunc);
  return v;
}

double spatial_increment_energy(double t, double x, double z,
                                SeriesTruncation* trunc) {
  require_nonnegative_time(t, "spatial_increment_energy");
  SeriesBudget budget(trunc);
  double d = torus_dist(x, z);
  double v = 0.0;
  if (t > 0.0 && d > 0.0) {
    v = (d / 2.0 - d * d / 4.0) - 2.0 * theta_mode_sum(0.0, 2.0 * t, budget) +
        2.0 * theta_mode_sum(d, 2.0 * t, budget);
  }
  budget.write_back(trunc);
  return v;
}

double temporal_increment_energy(double r, double t, SeriesTruncation* trunc) {
  require_nonnegative_time(r, "temporal_increment_energy");
  if (!(t >= r)) {
    throw std::invalid_argument(
        "temporal_increment_energy: need 0 <= r <= t");
  }
  SeriesBudget budget(trunc);
  double delta = t - r;
  double v = 0.0;
  if (r > 0.0 && delta > 0.0) {
    // Expand (1 - e^{-2 pi^2 r n^2}) (1 - e^{-pi^2 delta n^2})^2 into six
    // geometric pieces, each a theta_mode_sum at d = 0.
    v = mode_weight_closed_form(0.0) - 2.0 * theta_mode_sum(0.0, delta, budget) +
        theta_mode_sum(0.0, 2.0 * delta, budget) -
        theta_mode_sum(0.0, 2.0 * r, budget) +
        2.0 * theta_mode_sum(0.0, 2.0 * r + delta, budget) -
        theta_mode_sum(0.0, 2.0 * r + 2.0 * delta, budget);
    v = std::max(v, 0.0);
  }
  budget.write_back(trunc);
  return v;
}

double variance_of_H_truncated(double t, int n_modes) {
  require_nonnegative_time(t, "variance_of_H_truncated");
  if (n_modes < 0) {
    throw std::invalid_argument("variance_of_H_truncated: need n_modes >= 0");
  }
  if (t == 0.0) return 0.0;
  double acc = t / 2.0;
  for (int n = 1; n <= n_modes; ++n) {
    double nn = double(n) * n;
    acc += -std::expm1(-2.0 * kPiSq * nn * t) / (2.0 * kPiSq * nn);
  }
  return acc;
}

double covariance_of_H_truncated(double t, double x, double s, double y,
                                 int n_modes) {
  require_nonnegative_time(t, "covariance_of_H_truncated");
  require_nonnegative_time(s, "covariance_of_H_truncated");
  if (n_modes < 0) {
    throw std::invalid_argument(
        "covariance_of_H_truncated: need n_modes >= 0");
  }
  if (t == 0.0 || s == 0.0) return 0.0;
  double d = torus_dist(x, y);
  double acc = std::min(s, t) / 2.0;
  for (int n = 1; n <= n_modes; ++n) {
    double nn = double(n) * n;
    acc += std::cos(kPi * n * d) *
           (std::exp(-kPiSq * nn * std::abs(t - s)) -
            std::exp(-kPiSq * nn * (t + s))) /
           (2.0 * kPiSq * nn);
  }
  return acc;
}

ParabolicWeight parabolic_weight_integral(double t, double q) {
  require_positive_time(t, "parabolic_weight_integral");
  if (q < 0.0) {
    throw std::invalid_argument("parabolic_weight_integral: need q >= 0");
  }
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);
  const double root_t = std::sqrt(t);

  // Time-weight part int_0^t (t-s)^{q/2} G_{2s}(0,0) ds, with s = u^2 so
  // the s^{-1/2} endpoint becomes a smooth integrand. The quadrature probes
  // u close enough to 0 that u^2 underflows; substitute the analytic limit
  // 2u G_{2u^2}(0,0) -> (2 pi)^{-1/2} there.
  auto time_part = [&](double u) {
    double w = std::max(t - u * u, 0.0);
    double base = (u < 1e-150) ? inv_sqrt_2pi
                               : 2.0 * u * kernel_value(2.0 * u * u, 0.0, 0.0);
    return std::pow(w, q / 2.0) * base;
  };
  double part_a = integrate(time_part, 0.0, root_t, 1e-10);

  // Space-weight part int_0^t ds int_T G_s(0,y)^2 dist(y,0)^q dy, again
  // with s = u^2 and the inner variable scaled by the kernel width u so the
  // peak has a fixed shape at every u.
  auto space_part = [&](double u) {
    if (u < 1e-150) return (q == 0.0) ? inv_sqrt_2pi : 0.0;
    double s = u * u;
    double wmax = std::min(1.0 / u, 45.0);
    auto inner = [&](double w) {
      double y = u * w;
      double g = kernel_value(s, 0.0, y);
      return g * g * std::pow(y, q) * u;
    };
    double spatial = 2.0 * integrate(inner, 0.0, wmax, 1e-11);
    return 2.0 * u * spatial;
  };
  double part_b = integrate(space_part, 0.0, root_t, 1e-9);

  ParabolicWeight out;
  out.value = part_a + part_b;
  out.ratio = out.value / std::pow(t, (1.0 + q) / 2.0);
  return out;
}

}  // namespace torusheat
