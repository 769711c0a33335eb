#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "torusheat/gaussian_field.hpp"
#include "torusheat/parallel.hpp"

namespace torusheat {

// Box-counting dimension estimation, in the Euclidean metric and in the
// heat-equation scaling metric (time window 2^{-4j} by space window 2^{-2j}
// at dyadic level j), plus the lattice hit counts used by the counting
// experiments and deterministic Cantor-set generators for known targets.
//
// Box counting estimates the upper Minkowski dimension; for the self-similar
// sets and Gaussian images exercised here it coincides with the Hausdorff
// dimension in theory, and tolerances are set wide enough to absorb the
// estimator's bias. Counts are exact: points are keyed to half-open cells
// [m 2^{-j}, (m+1) 2^{-j}) per axis and distinct keys are counted without
// hashing, so results do not depend on insertion order or thread count.

struct PointCloud {
  std::vector<double> points;  // flattened, size() * dim entries
  int dim = 0;
  std::string provenance;  // free-form description of where the points came from

  std::size_t size() const {
    return dim > 0 ? points.size() / static_cast<std::size_t>(dim) : 0;
  }
  const double* point(std::size_t k) const {
    return points.data() + k * static_cast<std::size_t>(dim);
  }
};

// Number of distinct half-open cells of the grid 2^{-j} Z^dim containing at
// least one point. Requires a nonempty cloud with finite coordinates and
// 0 <= j <= 40 with |x| 2^j below 2^53 (exact integer keys). Serial and
// parallel policies are bit-identical.
long box_count(const PointCloud& cloud, int j, exec policy = exec::parallel);

// Count of occupied anisotropic cells of size 2^{-4j} (first axis, time) by
// 2^{-2j} (second axis, space): the box analogue of covering by balls of
// radius 2^{-j} in the metric |dt|^{1/4} + dist^{1/2}. The metric argument
// must declare exactly those exponents (1/4, 1/2); the cloud must be
// two-dimensional (t, x) rows.
long anisotropic_box_count(const PointCloud& cloud, int j,
                           const AnisotropicMetric& metric,
                           exec policy = exec::parallel);

struct DimensionEstimate {
  double slope = 0.0;          // raw least-squares slope, not clamped
  double ci_half_width = 0.0;  // standard error of the slope
  int j_min = 0;
  int j_max = 0;
  std::vector<long> counts;  // occupied boxes at j = j_min .. j_max
};

// Least-squares slope of log2(box count) against the dyadic level j over
// [j_min, j_max]. The window must span at least 3 octaves (j_max - j_min
// >= 3), else WindowTooNarrow. Counts are nondecreasing in j.
DimensionEstimate dim_estimate(const PointCloud& cloud, int j_min, int j_max);

// Anisotropic analogue: slope of log2(anisotropic count) against j. A flat
// rectangle in space-time fills 2^{4j} * 2^{2j} cells, slope 6.
DimensionEstimate anisotropic_dim_estimate(const PointCloud& cloud, int j_min,
                                           int j_max,
                                           const AnisotropicMetric& metric);

// Data-driven scale window: skip the two coarsest informative octaves
// (j starts where the count first reaches 2, plus 2) and stop where counts
// exceed 10% of the sample size (resolution saturation). Throws
// WindowTooNarrow when fewer than 3 octaves survive.
std::pair<int, int> choose_window(const PointCloud& cloud, int j_cap);

// Deterministic middle-interval Cantor construction on [lo, hi]: each level
// keeps the two end subintervals of relative length ratio (removing the
// middle 1 - 2 ratio), depth times; the generated points are the 2^depth
// left endpoints of the final intervals.
struct CantorSpec {
  int depth = 0;       // >= 0, capped at 24 (2^24 points)
  double ratio = 1.0 / 3.0;  // in (0, 1/2)
  double lo = 0.0;
  double hi = 1.0;

  double dimension() const;   // log 2 / log(1/ratio)
  std::size_t count() const;  // 2^depth
};

std::vector<double> cantor_points(const CantorSpec& spec);

// Hit count of a sampled field against a ball: the number of lattice sites
// y in the level-n spatial lattice (spacing 2^{-n(1+delta)/alpha}) whose
// field value lies in the closed ball B(nu, radius). The sample's sites must
// match that lattice exactly (LatticeMismatch otherwise); the last recorded
// time is used.
long count_lattice_hits(const FieldSample& field, int n, double delta,
                        const std::vector<double>& nu, double radius,
                        double alpha = 0.5);

struct ImageUpperReport {
  DimensionEstimate source;
  DimensionEstimate image;
  double alpha = 0.0;
  double bound = 0.0;  // source.slope / alpha plus both half-widths
  bool ok = false;     // image.slope <= bound
};

// Dimension inequality for alpha-Hoelder maps, dim f(F) <= dim F / alpha,
// checked on box-count slopes over a shared dyadic window. Both standard
// errors are absorbed into the bound (the image's directly, the source's
// scaled by 1/alpha), plus a fixed 1e-9 rounding slack.
ImageUpperReport lipschitz_image_upper_check(const PointCloud& source,
                                             const PointCloud& image,
                                             double alpha, int j_min,
                                             int j_max);

}  // namespace torusheat
