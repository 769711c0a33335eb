#include "torusheat/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "torusheat/errors.hpp"

namespace torusheat {

double torus_wrap(double x) {
  double w = x - 2.0 * std::floor((x + 1.0) / 2.0);
  // floor rounding can land exactly on the excluded endpoint
  if (w >= 1.0) w -= 2.0;
  if (w < -1.0) w += 2.0;
  return w;
}

double torus_dist(double a, double b) {
  double d = std::fabs(torus_wrap(a) - torus_wrap(b));
  return std::min(d, 2.0 - d);
}

double parabolic_dist(const SpaceTimePoint& a, const SpaceTimePoint& b) {
  return std::pow(std::fabs(a.t - b.t), 0.25) +
         std::sqrt(torus_dist(a.x, b.x));
}

double AnisotropicMetric::operator()(const std::vector<double>& a,
                                     const std::vector<double>& b) const {
  if (a.size() != exponents.size() || b.size() != exponents.size()) {
    throw std::invalid_argument("AnisotropicMetric: dimension mismatch");
  }
  double d = 0.0;
  for (std::size_t j = 0; j < exponents.size(); ++j) {
    bool on_torus = j < torus_axes.size() && torus_axes[j];
    double dj = on_torus ? torus_dist(a[j], b[j]) : std::fabs(a[j] - b[j]);
    d += std::pow(dj, exponents[j]);
  }
  return d;
}

namespace {

double lattice_spacing(int n, double delta, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("lattice: alpha must be in (0, 1]");
  }
  if (!(delta >= 0.0) || n < 0) {
    throw std::invalid_argument("lattice: need delta >= 0 and n >= 0");
  }
  return std::exp2(-static_cast<double>(n) * (1.0 + delta) / alpha);
}

// Multiples of `spacing` in the half-open window [lo, hi); used with
// [-1, 1) for torus axes so the identified endpoint appears exactly once.
std::vector<double> multiples_in(double spacing, double lo, double hi,
                                 bool closed_hi, std::size_t cap) {
  double inv = 1.0 / spacing;
  double est = (hi - lo) * inv + 2.0;
  if (est > static_cast<double>(cap)) {
    throw CapExceeded("lattice size estimate " + std::to_string(est) +
                      " exceeds cap " + std::to_string(cap));
  }
  long long jlo = static_cast<long long>(std::ceil(lo * inv - 1e-9));
  long long jhi = closed_hi
                      ? static_cast<long long>(std::floor(hi * inv + 1e-9))
                      : static_cast<long long>(std::ceil(hi * inv - 1e-9)) - 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(0LL, jhi - jlo + 1)));
  for (long long j = jlo; j <= jhi; ++j) {
    double v = static_cast<double>(j) * spacing;
    if (v < lo || (closed_hi ? v > hi : v >= hi)) continue;  // rounding guard
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<double> spatial_lattice(int n, double delta, double alpha,
                                    std::size_t cap) {
  double spacing = lattice_spacing(n, delta, alpha);
  auto pts = multiples_in(spacing, -1.0, 1.0, /*closed_hi=*/false, cap);
  if (pts.size() > cap) {
    throw CapExceeded("lattice size " + std::to_string(pts.size()) +
                      " exceeds cap " + std::to_string(cap));
  }
  return pts;
}

std::vector<std::vector<double>> product_lattice(
    int n, double delta, const std::vector<AxisSpec>& axes, std::size_t cap) {
  if (axes.empty()) throw std::invalid_argument("product_lattice: no axes");
  std::vector<std::vector<double>> per_axis;
  per_axis.reserve(axes.size());
  double total = 1.0;
  for (const auto& ax : axes) {
    double spacing = lattice_spacing(n, delta, ax.alpha);
    std::vector<double> pts;
    if (ax.torus) {
      pts = multiples_in(spacing, -1.0, 1.0, /*closed_hi=*/false, cap);
    } else {
      if (ax.hi < ax.lo) {
        throw std::invalid_argument("product_lattice: empty axis interval");
      }
      pts = multiples_in(spacing, ax.lo, ax.hi, /*closed_hi=*/true, cap);
    }
    total *= static_cast<double>(std::max<std::size_t>(pts.size(), 1));
    if (total > static_cast<double>(cap)) {
      throw CapExceeded("product lattice exceeds cap");
    }
    per_axis.push_back(std::move(pts));
  }
  for (const auto& pts : per_axis) {
    if (pts.empty()) return {};  // an axis missed the grid entirely
  }

  std::vector<std::vector<double>> out;
  std::size_t count = 1;
  for (const auto& pts : per_axis) count *= pts.size();
  out.reserve(count);
  std::vector<std::size_t> idx(per_axis.size(), 0);
  while (true) {
    std::vector<double> point(per_axis.size());
    for (std::size_t a = 0; a < per_axis.size(); ++a) point[a] = per_axis[a][idx[a]];
    out.push_back(std::move(point));
    std::size_t a = per_axis.size();
    while (a > 0) {
      --a;
      if (++idx[a] < per_axis[a].size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
  }
}

std::vector<std::size_t> greedy_order(
    const std::vector<SpaceTimePoint>& points) {
  const std::size_t n = points.size();
  std::vector<std::size_t> perm(n);
  if (n == 0) return perm;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (points[i].t == points[j].t &&
          torus_wrap(points[i].x) == torus_wrap(points[j].x)) {
        throw DuplicatePoints("greedy_order: points " + std::to_string(i) +
                              " and " + std::to_string(j) + " coincide");
      }
    }
  }

  std::vector<bool> used(n, false);
  std::size_t current = 0;  // arbitrary seed for the last slot: lowest index
  perm[n - 1] = current;
  used[current] = true;
  for (std::size_t slot = n - 1; slot-- > 0;) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      double d = parabolic_dist(points[current], points[j]);
      if (d < best) {
        best = d;
        best_idx = j;
      }
    }
    perm[slot] = best_idx;
    used[best_idx] = true;
    current = best_idx;
  }
  return perm;
}

}  // namespace torusheat
