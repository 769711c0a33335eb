#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "torusheat/errors.hpp"
#include "torusheat/torus.hpp"

using namespace torusheat;

TEST_SUITE_BEGIN("torus");

TEST_CASE("torus_wrap maps to the canonical half-open interval") {
  CHECK(torus_wrap(0.0) == 0.0);
  CHECK(torus_wrap(1.0) == -1.0);   // identified endpoint
  CHECK(torus_wrap(-1.0) == -1.0);  // canonical representative
  CHECK(torus_wrap(3.5) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(torus_wrap(-2.7) == doctest::Approx(-0.7).epsilon(1e-15));
  CHECK(torus_wrap(2.0) == 0.0);
  CHECK(torus_wrap(-4.0) == 0.0);

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> big(-1e6, 1e6);
  for (int i = 0; i < 100000; ++i) {
    double x = big(gen);
    double w = torus_wrap(x);
    CHECK(w >= -1.0);
    CHECK(w < 1.0);
    CHECK(torus_wrap(w) == w);  // idempotent on canonical values
  }
  // values creeping up on the identified endpoint from both sides
  for (double eps : {1e-18, 1e-16, 1e-12, 1e-9}) {
    CHECK(torus_wrap(1.0 - eps) < 1.0);
    CHECK(torus_wrap(-1.0 - eps) < 1.0);
    CHECK(torus_wrap(-1.0 - eps) >= -1.0);
    CHECK(torus_wrap(1.0 + eps) >= -1.0);
  }
}

TEST_CASE("torus_wrap is 2-periodic") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> shift(-40, 40);
  for (int i = 0; i < 20000; ++i) {
    double x = unif(gen);
    int k = shift(gen);
    // compare as circle points: x + 2k can round across the seam
    CHECK(torus_dist(torus_wrap(x + 2.0 * k), torus_wrap(x)) <= 1e-12);
  }
}

TEST_CASE("torus_dist basic values and axioms") {
  CHECK(torus_dist(-0.9, 0.9) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(torus_dist(0.0, 0.5) == doctest::Approx(0.5));
  CHECK(torus_dist(-1.0, 1.0) == 0.0);  // same point after wrapping
  CHECK(torus_dist(0.25, 0.25) == 0.0);
  CHECK(torus_dist(-0.5, 0.5) == doctest::Approx(1.0));  // antipodal

  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    double a = unif(gen), b = unif(gen), c = unif(gen);
    double dab = torus_dist(a, b);
    CHECK(dab >= 0.0);
    CHECK(dab <= 1.0);
    CHECK(dab == torus_dist(b, a));
    CHECK(torus_dist(a, a) == 0.0);
    // triangle inequality
    CHECK(torus_dist(a, c) <= torus_dist(a, b) + torus_dist(b, c) + 1e-12);
    // translation invariance
    double s = unif(gen);
    CHECK(torus_dist(a + s, b + s) == doctest::Approx(dab).epsilon(1e-12));
  }
}

TEST_CASE("parabolic_dist values and metric axioms") {
  SpaceTimePoint p{0.0, 0.0}, q{1.0, 0.0};
  CHECK(parabolic_dist(p, q) == doctest::Approx(1.0));
  SpaceTimePoint r{0.0, 0.25};
  CHECK(parabolic_dist(p, r) == doctest::Approx(0.5));
  SpaceTimePoint u{0.0625, -0.5}, v{0.0, -0.5};
  CHECK(parabolic_dist(u, v) == doctest::Approx(0.5));  // 0.0625^{1/4}

  std::mt19937_64 gen(37);
  std::uniform_real_distribution<double> tdist(0.0, 2.0);
  std::uniform_real_distribution<double> xdist(-1.0, 1.0);
  auto rand_pt = [&] { return SpaceTimePoint{tdist(gen), xdist(gen)}; };
  for (int i = 0; i < 10000; ++i) {
    auto a = rand_pt(), b = rand_pt(), c = rand_pt();
    double dab = parabolic_dist(a, b);
    CHECK(dab >= 0.0);
    CHECK(dab == parabolic_dist(b, a));
    CHECK(parabolic_dist(a, a) == 0.0);
    CHECK(parabolic_dist(a, c) <= dab + parabolic_dist(b, c) + 1e-12);
  }
  // identity of indiscernibles across the wrap seam
  SpaceTimePoint seam_a{0.5, -1.0}, seam_b{0.5, 1.0};
  CHECK(parabolic_dist(seam_a, seam_b) == 0.0);
}

TEST_CASE("AnisotropicMetric reproduces parabolic_dist and validates input") {
  AnisotropicMetric rho{{0.25, 0.5}, {false, true}};
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> tdist(0.0, 2.0);
  std::uniform_real_distribution<double> xdist(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    SpaceTimePoint a{tdist(gen), xdist(gen)}, b{tdist(gen), xdist(gen)};
    CHECK(rho({a.t, a.x}, {b.t, b.x}) ==
          doctest::Approx(parabolic_dist(a, b)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(rho({0.0}, {0.0, 0.0}), std::invalid_argument);

  AnisotropicMetric plain{{1.0, 1.0}, {}};
  CHECK(plain({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(7.0));
}

TEST_CASE("spatial_lattice spacing, count and canonical range") {
  // alpha = 1/2, delta = 1, n = 1: spacing 2^{-4}, 32 points in [-1, 1)
  auto pts = spatial_lattice(1, 1.0, 0.5);
  REQUIRE(pts.size() == 32);
  CHECK(pts.front() == doctest::Approx(-1.0));
  CHECK(pts.back() == doctest::Approx(1.0 - 1.0 / 16.0));
  CHECK(std::is_sorted(pts.begin(), pts.end()));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i] - pts[i - 1] == doctest::Approx(1.0 / 16.0).epsilon(1e-13));
  }

  // n = 0 always gives spacing 1 regardless of the exponents
  auto coarse = spatial_lattice(0, 0.7, 0.3);
  REQUIRE(coarse.size() == 2);
  CHECK(coarse[0] == doctest::Approx(-1.0));
  CHECK(coarse[1] == doctest::Approx(0.0));

  // alpha = 1, delta = 0: dyadic lattice
  auto dyadic = spatial_lattice(3, 0.0, 1.0);
  CHECK(dyadic.size() == 16);

  // parabolic counting lattice: alpha = 1/2, delta = 1/2 gives 2^{-3n}
  auto counting = spatial_lattice(2, 0.5, 0.5);
  CHECK(counting.size() == std::size_t{1} << 7);  // 2 / 2^{-6}

  for (double p : counting) {
    CHECK(p >= -1.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("spatial_lattice rejects oversized requests before allocating") {
  CHECK_THROWS_AS(spatial_lattice(13, 1.0, 0.5), CapExceeded);
  CHECK_THROWS_AS(spatial_lattice(30, 0.0, 1.0, 1u << 20), CapExceeded);
  CHECK_THROWS_AS(spatial_lattice(-1, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_lattice(1, -0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_lattice(1, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_lattice(1, 0.0, 1.5), std::invalid_argument);
}

TEST_CASE("product_lattice covers the box lexicographically") {
  // time axis [0,1] with alpha 1/4, space axis the torus with alpha 1/2
  std::vector<AxisSpec> axes{{0.25, false, 0.0, 1.0}, {0.5, true, 0.0, 0.0}};
  auto grid = product_lattice(1, 0.0, axes);
  // spacings 2^{-4} and 2^{-2}: 17 closed-interval times, 8 torus sites
  REQUIRE(grid.size() == 17u * 8u);
  CHECK(grid.front()[0] == doctest::Approx(0.0));
  CHECK(grid.front()[1] == doctest::Approx(-1.0));
  CHECK(grid.back()[0] == doctest::Approx(1.0));
  CHECK(grid.back()[1] == doctest::Approx(0.75));
  // lexicographic: slowest axis first
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK((grid[i][0] > grid[i - 1][0] ||
           (grid[i][0] == grid[i - 1][0] && grid[i][1] > grid[i - 1][1])));
  }

  // interval endpoints on the grid are both kept
  std::vector<AxisSpec> seg{{1.0, false, 0.25, 0.75}};
  auto line = product_lattice(2, 0.0, seg);  // spacing 1/4
  REQUIRE(line.size() == 3);
  CHECK(line[0][0] == doctest::Approx(0.25));
  CHECK(line[2][0] == doctest::Approx(0.75));

  // an axis whose window contains no grid multiple yields the empty set
  std::vector<AxisSpec> miss{{1.0, false, 0.3, 0.4}};
  CHECK(product_lattice(1, 0.0, miss).empty());  // spacing 1/2

  CHECK_THROWS_AS(product_lattice(1, 0.0, {}), std::invalid_argument);
  std::vector<AxisSpec> twist{{0.25, false, 0.0, 1.0}, {0.25, false, 0.0, 1.0}};
  CHECK_THROWS_AS(product_lattice(7, 1.0, twist, 1u << 16), CapExceeded);
}

namespace {

// Independent check of the ordering contract: every point is at least as
// close to its immediate predecessor as to any earlier point.
void check_greedy_contract(const std::vector<SpaceTimePoint>& pts,
                           const std::vector<std::size_t>& perm) {
  REQUIRE(perm.size() == pts.size());
  std::vector<bool> seen(pts.size(), false);
  for (auto i : perm) {
    REQUIRE(i < pts.size());
    REQUIRE(!seen[i]);
    seen[i] = true;
  }
  for (std::size_t i = 1; i < perm.size(); ++i) {
    double to_prev = parabolic_dist(pts[perm[i]], pts[perm[i - 1]]);
    for (std::size_t j = 0; j < i; ++j) {
      CHECK(to_prev <= parabolic_dist(pts[perm[i]], pts[perm[j]]) + 1e-12);
    }
  }
}

}  // namespace

TEST_CASE("greedy_order satisfies the nearest-predecessor contract") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> tdist(0.0, 1.0);
    std::uniform_real_distribution<double> xdist(-1.0, 1.0);
    std::vector<SpaceTimePoint> pts;
    std::size_t n = 5 + seed * 2;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({tdist(gen), xdist(gen)});
    auto perm = greedy_order(pts);
    check_greedy_contract(pts, perm);
    // deterministic
    CHECK(greedy_order(pts) == perm);
  }
}

TEST_CASE("greedy_order handles degenerate inputs") {
  CHECK(greedy_order({}).empty());
  auto single = greedy_order({{0.5, 0.25}});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == 0);

  std::vector<SpaceTimePoint> dup{{0.5, 0.25}, {0.1, 0.0}, {0.5, 0.25}};
  CHECK_THROWS_AS(greedy_order(dup), DuplicatePoints);
  // coincidence across the wrap seam is still a duplicate
  std::vector<SpaceTimePoint> seam{{0.5, -1.0}, {0.5, 1.0}};
  CHECK_THROWS_AS(greedy_order(seam), DuplicatePoints);

  // collinear-in-time points: order must still satisfy the contract
  std::vector<SpaceTimePoint> line;
  for (int i = 0; i < 12; ++i) line.push_back({0.1 * i, 0.0});
  check_greedy_contract(line, greedy_order(line));
}

TEST_SUITE_END();
