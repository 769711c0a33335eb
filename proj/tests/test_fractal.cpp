#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "torusheat/errors.hpp"
#include "torusheat/fractal.hpp"
#include "torusheat/gaussian_field.hpp"
#include "torusheat/rng.hpp"
#include "torusheat/torus.hpp"

using namespace torusheat;

namespace {

AnisotropicMetric parabolic_metric() {
  AnisotropicMetric m;
  m.exponents = {0.25, 0.5};
  m.torus_axes = {false, true};
  return m;
}

PointCloud cloud1d(std::vector<double> xs, std::string tag = "") {
  PointCloud c;
  c.points = std::move(xs);
  c.dim = 1;
  c.provenance = std::move(tag);
  return c;
}

// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("fractal");

TEST_CASE("single point occupies one cell at every scale") {
  PointCloud c;
  c.dim = 2;
  c.points = {0.3, -0.7};
  for (int j = 0; j <= 20; ++j) CHECK(box_count(c, j) == 1);
  for (int j = 0; j <= 6; ++j) {
    CHECK(anisotropic_box_count(c, j, parabolic_metric()) == 1);
  }
}

TEST_CASE("half-open cells separate the unit square corners at j = 0") {
  PointCloud c;
  c.dim = 2;
  c.points = {0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  // Each corner sits in its own half-open cell: (1, y) belongs to the cell
  // starting at 1, not the one ending there.
  CHECK(box_count(c, 0) == 4);
  CHECK(box_count(c, 3) == 4);
}

TEST_CASE("dense uniform sample fills every cell") {
  NormalStream g(derive_stream(7, {55}));
  PointCloud c;
  c.dim = 2;
  c.points.reserve(2 * 65536);
  for (int k = 0; k < 65536; ++k) {
    c.points.push_back(g.uniform01());
    c.points.push_back(g.uniform01());
  }
  // 2^16 points over 2^10 cells: the chance of an empty cell is ~1e-25.
  CHECK(box_count(c, 5) == 1024);
}

TEST_CASE("a line segment has dimension one") {
  std::vector<double> pts;
  for (int i = 0; i <= (1 << 14); ++i) {
    pts.push_back(double(i) / (1 << 14));
    pts.push_back(0.3);
  }
  PointCloud c;
  c.dim = 2;
  c.points = std::move(pts);
  DimensionEstimate est = dim_estimate(c, 3, 9);
  CHECK(std::fabs(est.slope - 1.0) < 0.05);
  REQUIRE(est.counts.size() == 7);
  for (std::size_t k = 1; k < est.counts.size(); ++k) {
    CHECK(est.counts[k] >= est.counts[k - 1]);
  }

  // The automatic window lands inside the informative range and reproduces
  // the slope.
  auto [j_lo, j_hi] = choose_window(c, 12);
  CHECK(j_lo >= 2);
  CHECK(j_hi - j_lo >= 3);
  CHECK(std::fabs(dim_estimate(c, j_lo, j_hi).slope - 1.0) < 0.05);
}

TEST_CASE("middle-thirds Cantor set matches its self-similar dimension") {
  CantorSpec spec;
  spec.depth = 12;
  spec.ratio = 1.0 / 3.0;
  const std::vector<double> pts = cantor_points(spec);
  REQUIRE(pts.size() == spec.count());
  REQUIRE(pts.size() == 4096);
  CHECK(spec.dimension() == doctest::Approx(std::log(2.0) / std::log(3.0)));
  PointCloud c = cloud1d(pts);

  // Ground truth (brute force over depth-20 endpoints): dyadic covers of
  // the ternary set count {6, 10, 16, 28, 42, 70} at j = 3..8. Those coarse
  // octaves carry a log-periodic, upward-biased slope of 0.70686; the
  // estimator must reproduce it exactly, not the asymptotic dimension.
  DimensionEstimate coarse = dim_estimate(c, 3, 8);
  const std::vector<long> expected = {6, 10, 16, 28, 42, 70};
  REQUIRE(coarse.counts.size() == expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    CHECK(coarse.counts[k] == expected[k]);
  }
  CHECK(coarse.slope == doctest::Approx(0.70686).epsilon(1e-3));

  // Deeper windows converge to log2/log3 = 0.6309 (0.6476 at [5,10]).
  DimensionEstimate fine = dim_estimate(c, 5, 10);
  CHECK(std::fabs(fine.slope - spec.dimension()) < 0.05);
}

TEST_CASE("quarter Cantor set counts are exact on aligned dyadic grids") {
  // ratio 1/4: level-k intervals start at multiples of 4^{-k} and all
  // endpoints are dyadic, so floor arithmetic is exact and the level-2k
  // dyadic count equals 2^k exactly.
  CantorSpec spec;
  spec.depth = 10;
  spec.ratio = 0.25;
  const std::vector<double> pts = cantor_points(spec);
  REQUIRE(pts.size() == 1024);
  CHECK(spec.dimension() == doctest::Approx(0.5));
  PointCloud c = cloud1d(pts);
  for (int k = 0; k <= 10; ++k) {
    CHECK(box_count(c, 2 * k) == (1L << k));
  }
}

TEST_CASE("Brownian graph has dimension three halves") {
  // Independent oracle: a random-walk path with N(0, 2^-16) increments is a
  // Brownian motion sampled at 2^-16 resolution; its graph has box
  // dimension 3/2.
  NormalStream g(derive_stream(99, {3}));
  const int n = 1 << 16;
  PointCloud c;
  c.dim = 2;
  c.points.reserve(2 * (n + 1));
  double b = 0.0;
  const double sd = std::sqrt(1.0 / n);
  for (int i = 0; i <= n; ++i) {
    c.points.push_back(double(i) / n);
    c.points.push_back(b);
    b += sd * g();
  }
  DimensionEstimate est = dim_estimate(c, 3, 8);
  CHECK(std::fabs(est.slope - 1.5) < 0.1);
}

TEST_CASE("counts are monotone and refine by at most 2^dim per octave") {
  NormalStream g(derive_stream(4, {81}));
  PointCloud c;
  c.dim = 2;
  for (int k = 0; k < 2000; ++k) {
    c.points.push_back(g());
    c.points.push_back(0.5 * g() + 0.1);
  }
  long prev = box_count(c, 0);
  for (int j = 1; j <= 10; ++j) {
    const long cur = box_count(c, j);
    CHECK(cur >= prev);
    CHECK(cur <= 4 * prev);
    prev = cur;
  }
}

TEST_CASE("isolated points saturate and the fine-scale slope vanishes") {
  std::vector<double> pts;
  for (int k = 0; k < 7; ++k) pts.push_back(0.03 + 0.13 * k);
  PointCloud c = cloud1d(std::move(pts));
  DimensionEstimate est = dim_estimate(c, 8, 14);
  for (long n : est.counts) CHECK(n == 7);
  CHECK(est.slope == 0.0);
  CHECK(est.ci_half_width < 1e-12);  // exact zero up to OLS round-off
}

TEST_CASE("anisotropic cells scale like time^4 by space^2") {
  // Deterministic 4096 x 64 grid on [0,1)^2: at level j <= 3 every
  // 2^{-4j} x 2^{-2j} cell is hit, so counts are exactly 2^{6j} and the
  // slope is exactly 6.
  PointCloud rect;
  rect.dim = 2;
  rect.points.reserve(2 * 4096 * 64);
  for (int i = 0; i < 4096; ++i) {
    for (int l = 0; l < 64; ++l) {
      rect.points.push_back((i + 0.5) / 4096.0);
      rect.points.push_back((l + 0.5) / 64.0);
    }
  }
  const AnisotropicMetric metric = parabolic_metric();
  for (int j = 0; j <= 3; ++j) {
    CHECK(anisotropic_box_count(rect, j, metric) == (1L << (6 * j)));
  }
  DimensionEstimate est = anisotropic_dim_estimate(rect, 0, 3, metric);
  CHECK(est.slope == doctest::Approx(6.0));

  // A pure time segment fills 2^{4j} cells: slope 4.
  PointCloud seg;
  seg.dim = 2;
  for (int i = 0; i < 4096; ++i) {
    seg.points.push_back((i + 0.5) / 4096.0);
    seg.points.push_back(0.37);
  }
  for (int j = 0; j <= 3; ++j) {
    CHECK(anisotropic_box_count(seg, j, metric) == (1L << (4 * j)));
  }
  CHECK(anisotropic_dim_estimate(seg, 0, 3, metric).slope == doctest::Approx(4.0));

  // Refining one level multiplies the count by at most 2^4 * 2^2 = 64.
  NormalStream g(derive_stream(12, {9}));
  PointCloud rnd;
  rnd.dim = 2;
  for (int k = 0; k < 3000; ++k) {
    rnd.points.push_back(g.uniform01());
    rnd.points.push_back(2.0 * g.uniform01() - 1.0);
  }
  long prev = anisotropic_box_count(rnd, 0, metric);
  for (int j = 1; j <= 4; ++j) {
    const long cur = anisotropic_box_count(rnd, j, metric);
    CHECK(cur >= prev);
    CHECK(cur <= 64 * prev);
    prev = cur;
  }

  // The metric must carry the heat-scaling exponents and (t, x) rows.
  AnisotropicMetric wrong;
  wrong.exponents = {0.5, 0.5};
  CHECK_THROWS_AS(anisotropic_box_count(rect, 2, wrong), std::invalid_argument);
  PointCloud c3;
  c3.dim = 3;
  c3.points = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(anisotropic_box_count(c3, 2, metric), std::invalid_argument);
}

TEST_CASE("image counts are translation invariant in law") {
  // The field is stationary in x, so box counts of u({t} x F) and of
  // u({t} x (F + s)) are identically distributed. Two independent count
  // samples must pass a two-sample KS test at the 1% level (threshold
  // 1.628 sqrt(2/n) for equal sizes).
  const int n_rep = 64;
  std::vector<double> sites(256), shifted(256);
  for (int j = 0; j < 256; ++j) {
    sites[j] = -1.0 + 2.0 * j / 256.0;
    shifted[j] = torus_wrap(sites[j] + 0.3127);
  }
  auto counts_for = [&](const std::vector<double>& where, std::uint64_t rep0) {
    std::vector<double> counts;
    for (int r = 0; r < n_rep; ++r) {
      SpectralState st = make_state(2, 128, 2026, rep0 + r);
      evolve(st, 0.25);
      PointCloud img;
      img.dim = 2;
      img.points = render(st, where);
      counts.push_back(double(box_count(img, 6)));
    }
    return counts;
  };
  const double d = ks_two_sample(counts_for(sites, 0), counts_for(shifted, 1000));
  CHECK(d < 1.628 * std::sqrt(2.0 / n_rep));
}

TEST_CASE("lattice hit counts match the ball definition") {
  const int n = 2;
  const double delta = 0.5;
  const std::vector<double> lattice = spatial_lattice(n, delta, 0.5);
  REQUIRE(lattice.size() == 128);
  FieldSample field = sample_grid({0.25}, lattice, 2, 64, 31);

  const double inf = std::numeric_limits<double>::infinity();
  CHECK(count_lattice_hits(field, n, delta, {0.0, 0.0}, inf) == 128);
  CHECK(count_lattice_hits(field, n, delta, {127.0, -3.0}, 0.0) == 0);

  // A center placed at an observed value always scores at least one hit.
  std::vector<double> nu = {field.values[17 * 2], field.values[17 * 2 + 1]};
  CHECK(count_lattice_hits(field, n, delta, nu, 0.0) >= 1);
  CHECK(count_lattice_hits(field, n, delta, nu, std::ldexp(1.0, -n)) >= 1);

  // Constant field: every site hits any ball around the constant.
  FieldSample flat;
  flat.times = {1.0};
  flat.sites = lattice;
  flat.p = 1;
  flat.values.assign(128, 0.7);
  CHECK(count_lattice_hits(flat, n, delta, {0.7}, 0.25) == 128);
  CHECK(count_lattice_hits(flat, n, delta, {0.7}, 0.0) == 128);

  // Sites must lie exactly on the lattice.
  FieldSample off = flat;
  for (double& s : off.sites) s += 1e-6;
  CHECK_THROWS_AS(count_lattice_hits(off, n, delta, {0.7}, 1.0), LatticeMismatch);
  FieldSample small = flat;
  small.sites.resize(64);
  small.values.resize(64);
  CHECK_THROWS_AS(count_lattice_hits(small, n, delta, {0.7}, 1.0), LatticeMismatch);
  CHECK_THROWS_AS(count_lattice_hits(field, n, delta, {0.7}, 1.0),
                  std::invalid_argument);  // center dimension mismatch
}

TEST_CASE("degenerate inputs are rejected") {
  PointCloud empty;
  empty.dim = 2;
  CHECK_THROWS_AS(box_count(empty, 3), std::invalid_argument);

  PointCloud nan;
  nan.dim = 1;
  nan.points = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(box_count(nan, 3), std::invalid_argument);

  PointCloud one;
  one.dim = 1;
  one.points = {0.5};
  CHECK_THROWS_AS(dim_estimate(one, 3, 5), WindowTooNarrow);  // span < 3
  CHECK_THROWS_AS(choose_window(one, 12), WindowTooNarrow);

  CantorSpec bad;
  bad.ratio = 0.5;
  CHECK_THROWS_AS(cantor_points(bad), std::invalid_argument);
  bad.ratio = 0.3;
  bad.depth = -1;
  CHECK_THROWS_AS(cantor_points(bad), std::invalid_argument);
}

TEST_CASE("serial and parallel counting agree bit for bit") {
  NormalStream g(derive_stream(5, {44}));
  PointCloud c;
  c.dim = 3;
  for (int k = 0; k < 5000; ++k) {
    c.points.push_back(g());
    c.points.push_back(g());
    c.points.push_back(g());
  }
  for (int j = 0; j <= 8; ++j) {
    CHECK(box_count(c, j, exec::serial) == box_count(c, j, exec::parallel));
  }
}

TEST_SUITE_END();
