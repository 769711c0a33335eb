#include "torusheat/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "torusheat/errors.hpp"
#include "torusheat/linreg.hpp"
#include "torusheat/torus.hpp"

namespace torusheat {
namespace {

void validate_cloud(const PointCloud& cloud) {
  if (cloud.dim < 1) {
    throw std::invalid_argument("point cloud: dimension must be >= 1");
  }
  if (cloud.points.empty() ||
      cloud.points.size() % static_cast<std::size_t>(cloud.dim) != 0) {
    throw std::invalid_argument(
        "point cloud: need a nonempty multiple of dim coordinates");
  }
  for (double x : cloud.points) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("point cloud: non-finite coordinate");
    }
  }
}

// Distinct rows among the integer key tuples keys[k*dim .. k*dim+dim-1],
// counted exactly via an index sort (no hashing).
long distinct_rows(const std::vector<std::int64_t>& keys, std::size_t n,
                   int dim) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  auto less = [&keys, dim](std::uint32_t a, std::uint32_t b) {
    const std::int64_t* ka = keys.data() + std::size_t(a) * dim;
    const std::int64_t* kb = keys.data() + std::size_t(b) * dim;
    for (int i = 0; i < dim; ++i) {
      if (ka[i] != kb[i]) return ka[i] < kb[i];
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  long count = n > 0 ? 1 : 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (less(idx[k - 1], idx[k])) ++count;
  }
  return count;
}

// Per-axis cell keys floor(x * scale[i]); throws when the product leaves the
// exact-integer range of double.
long count_cells(const PointCloud& cloud, const std::vector<double>& scale,
                 exec policy) {
  validate_cloud(cloud);
  const std::size_t n = cloud.size();
  const int dim = cloud.dim;
  std::vector<std::int64_t> keys(n * static_cast<std::size_t>(dim));
  const double cap = 9.0e15;  // < 2^53: floor is exact below this
  bool overflow = false;
  if (policy == exec::parallel) {
#pragma omp parallel for schedule(static) reduction(|| : overflow)
    for (std::size_t k = 0; k < n; ++k) {
      const double* pt = cloud.point(k);
      for (int i = 0; i < dim; ++i) {
        const double scaled = pt[i] * scale[i];
        if (std::fabs(scaled) > cap) {
          overflow = true;
        } else {
          keys[k * dim + i] = static_cast<std::int64_t>(std::floor(scaled));
        }
      }
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      const double* pt = cloud.point(k);
      for (int i = 0; i < dim; ++i) {
        const double scaled = pt[i] * scale[i];
        if (std::fabs(scaled) > cap) {
          overflow = true;
        } else {
          keys[k * dim + i] = static_cast<std::int64_t>(std::floor(scaled));
        }
      }
    }
  }
  if (overflow) {
    throw std::invalid_argument(
        "box count: coordinate * 2^j exceeds the exact integer range");
  }
  return distinct_rows(keys, n, dim);
}

void check_parabolic_metric(const AnisotropicMetric& metric) {
  if (metric.exponents.size() != 2 || metric.exponents[0] != 0.25 ||
      metric.exponents[1] != 0.5) {
    throw std::invalid_argument(
        "anisotropic box count: metric must declare exponents (1/4, 1/2)");
  }
}

}  // namespace

long box_count(const PointCloud& cloud, int j, exec policy) {
  if (j < 0 || j > 40) {
    throw std::invalid_argument("box_count: need 0 <= j <= 40");
  }
  const std::vector<double> scale(cloud.dim > 0 ? cloud.dim : 1,
                                  std::ldexp(1.0, j));
  return count_cells(cloud, scale, policy);
}

long anisotropic_box_count(const PointCloud& cloud, int j,
                           const AnisotropicMetric& metric, exec policy) {
  if (j < 0 || j > 12) {
    throw std::invalid_argument("anisotropic_box_count: need 0 <= j <= 12");
  }
  check_parabolic_metric(metric);
  if (cloud.dim != 2) {
    throw std::invalid_argument(
        "anisotropic_box_count: cloud rows must be (t, x) pairs");
  }
  const std::vector<double> scale = {std::ldexp(1.0, 4 * j),
                                     std::ldexp(1.0, 2 * j)};
  return count_cells(cloud, scale, policy);
}

namespace {

DimensionEstimate fit_counts(const PointCloud& cloud, int j_min, int j_max,
                             const std::function<long(int)>& counter) {
  if (j_min < 0) throw std::invalid_argument("dim_estimate: j_min < 0");
  if (j_max - j_min < 3) {
    throw WindowTooNarrow("dimension window spans fewer than 3 octaves: [" +
                          std::to_string(j_min) + ", " + std::to_string(j_max) +
                          "]");
  }
  validate_cloud(cloud);
  DimensionEstimate est;
  est.j_min = j_min;
  est.j_max = j_max;
  std::vector<double> xs, ys;
  for (int j = j_min; j <= j_max; ++j) {
    const long c = counter(j);
    est.counts.push_back(c);
    xs.push_back(static_cast<double>(j));
    ys.push_back(std::log2(static_cast<double>(c)));
  }
  const LinearFit fit = least_squares(xs, ys);
  est.slope = fit.slope;
  est.ci_half_width = fit.slope_stderr;
  return est;
}

}  // namespace

DimensionEstimate dim_estimate(const PointCloud& cloud, int j_min, int j_max) {
  return fit_counts(cloud, j_min, j_max,
                    [&cloud](int j) { return box_count(cloud, j); });
}

DimensionEstimate anisotropic_dim_estimate(const PointCloud& cloud, int j_min,
                                           int j_max,
                                           const AnisotropicMetric& metric) {
  return fit_counts(cloud, j_min, j_max, [&cloud, &metric](int j) {
    return anisotropic_box_count(cloud, j, metric);
  });
}

std::pair<int, int> choose_window(const PointCloud& cloud, int j_cap) {
  if (j_cap < 0 || j_cap > 40) {
    throw std::invalid_argument("choose_window: need 0 <= j_cap <= 40");
  }
  validate_cloud(cloud);
  const double saturation = 0.1 * static_cast<double>(cloud.size());
  int first_structure = -1;
  int last_unsaturated = -1;
  for (int j = 0; j <= j_cap; ++j) {
    const long c = box_count(cloud, j);
    if (first_structure < 0 && c >= 2) first_structure = j;
    if (static_cast<double>(c) <= saturation) last_unsaturated = j;
  }
  if (first_structure < 0) {
    throw WindowTooNarrow(
        "choose_window: the cloud never splits across two cells");
  }
  const int j_min = first_structure + 2;
  const int j_max = last_unsaturated;
  if (j_max - j_min < 3) {
    throw WindowTooNarrow("choose_window: only [" + std::to_string(j_min) +
                          ", " + std::to_string(j_max) +
                          "] survives the bias cuts");
  }
  return {j_min, j_max};
}

double CantorSpec::dimension() const {
  return std::log(2.0) / std::log(1.0 / ratio);
}

std::size_t CantorSpec::count() const { return std::size_t(1) << depth; }

std::vector<double> cantor_points(const CantorSpec& spec) {
  if (spec.depth < 0 || spec.depth > 24) {
    throw std::invalid_argument("cantor_points: need 0 <= depth <= 24");
  }
  if (!(spec.ratio > 0.0) || !(spec.ratio < 0.5)) {
    throw std::invalid_argument("cantor_points: need ratio in (0, 1/2)");
  }
  if (!(spec.hi > spec.lo)) {
    throw std::invalid_argument("cantor_points: need hi > lo");
  }
  std::vector<double> left = {spec.lo};
  double len = spec.hi - spec.lo;
  for (int level = 0; level < spec.depth; ++level) {
    const double offset = (1.0 - spec.ratio) * len;
    std::vector<double> next;
    next.reserve(left.size() * 2);
    for (double a : left) {
      next.push_back(a);
      next.push_back(a + offset);
    }
    left = std::move(next);
    len *= spec.ratio;
  }
  std::sort(left.begin(), left.end());
  return left;
}

long count_lattice_hits(const FieldSample& field, int n, double delta,
                        const std::vector<double>& nu, double radius,
                        double alpha) {
  if (field.p < 1 || static_cast<int>(nu.size()) != field.p) {
    throw std::invalid_argument(
        "count_lattice_hits: center dimension must match the field");
  }
  if (radius < 0.0) {
    throw std::invalid_argument("count_lattice_hits: radius must be >= 0");
  }
  if (field.times.empty()) {
    throw std::invalid_argument("count_lattice_hits: field has no snapshots");
  }
  const std::vector<double> lattice = spatial_lattice(n, delta, alpha);
  if (field.sites.size() != lattice.size()) {
    throw LatticeMismatch(
        "field is sampled on " + std::to_string(field.sites.size()) +
        " sites but the level-" + std::to_string(n) + " lattice has " +
        std::to_string(lattice.size()));
  }
  for (std::size_t j = 0; j < lattice.size(); ++j) {
    if (std::fabs(field.sites[j] - lattice[j]) > 1e-12) {
      throw LatticeMismatch("field site " + std::to_string(j) +
                            " does not lie on the level-" + std::to_string(n) +
                            " lattice");
    }
  }
  const std::size_t last = field.times.size() - 1;
  const std::size_t n_sites = field.sites.size();
  const int p = field.p;
  const double* base = field.values.data() + last * n_sites * p;
  const double r2 = radius * radius;  // infinite radius admits every site
  long hits = 0;
  for (std::size_t j = 0; j < n_sites; ++j) {
    const double* v = base + j * p;
    double q = 0.0;
    for (int i = 0; i < p; ++i) q += (v[i] - nu[i]) * (v[i] - nu[i]);
    if (q <= r2) ++hits;
  }
  return hits;
}

ImageUpperReport lipschitz_image_upper_check(const PointCloud& source,
                                             const PointCloud& image,
                                             double alpha, int j_min,
                                             int j_max) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("lipschitz_image_upper_check: alpha in (0,1]");
  }
  if (source.size() != image.size()) {
    throw std::invalid_argument(
        "lipschitz_image_upper_check: source and image must pair up "
        "point-for-point");
  }
  ImageUpperReport report;
  report.source = dim_estimate(source, j_min, j_max);
  report.image = dim_estimate(image, j_min, j_max);
  report.alpha = alpha;
  report.bound = (report.source.slope + report.source.ci_half_width) / alpha +
                 report.image.ci_half_width + 1e-9;
  report.ok = report.image.slope <= report.bound;
  return report;
}

}  // namespace torusheat
