#pragma once

#include <cstddef>
#include <vector>

namespace torusheat {

// The spatial domain is the circle of circumference 2, represented by the
// half-open interval [-1, 1) with arithmetic mod 2. The half-open choice
// gives every point a unique representative, so exact comparisons and
// deduplication are well defined.

inline constexpr std::size_t kLatticeCapDefault = std::size_t{1} << 24;

// Canonical representative in [-1, 1).
double torus_wrap(double x);

// Geodesic distance on the circle: min(|a-b|, 2-|a-b|), always in [0, 1].
double torus_dist(double a, double b);

struct SpaceTimePoint {
  double t = 0.0;  // nonnegative time
  double x = 0.0;  // torus coordinate
};

// Parabolic metric |dt|^{1/4} + dist(x,y)^{1/2}: the natural scaling metric
// of the heat equation (one unit of time ~ two units of space regularity).
double parabolic_dist(const SpaceTimePoint& a, const SpaceTimePoint& b);

// Anisotropic distance sum_j |a_j - b_j|^{alpha_j}; axes flagged as torus
// axes apply torus_dist before the exponent.
struct AnisotropicMetric {
  std::vector<double> exponents;  // alpha_j in (0, 1]
  std::vector<bool> torus_axes;   // empty means all Euclidean

  double operator()(const std::vector<double>& a,
                    const std::vector<double>& b) const;
};

// All torus points j * 2^{-n(1+delta)/alpha} in [-1, 1), sorted ascending.
// Endpoint identification: -1 and 1 coincide mod 2 and count once.
// Throws CapExceeded before materializing an oversized lattice.
std::vector<double> spatial_lattice(int n, double delta, double alpha,
                                    std::size_t cap = kLatticeCapDefault);

// One axis of a product lattice. Torus axes span all of [-1, 1) half-open;
// interval axes keep both endpoints when they land on the grid (closed box).
struct AxisSpec {
  double alpha = 1.0;
  bool torus = false;
  double lo = 0.0;
  double hi = 0.0;
};

// Cartesian product of per-axis lattices with spacing 2^{-(1+delta)n/alpha_j},
// intersected with the box. Points are emitted in lexicographic axis order.
std::vector<std::vector<double>> product_lattice(
    int n, double delta, const std::vector<AxisSpec>& axes,
    std::size_t cap = kLatticeCapDefault);

// Permutation perm such that the sequence s_i = points[perm[i]] satisfies
// rho(s_i, s_{i-1}) <= rho(s_i, s_j) for every j < i: each point's
// predecessor is its nearest earlier neighbour. Built back to front: the
// last slot gets index 0, then each lower slot gets the remaining point
// nearest to the one just placed (ties to the lowest index).
// Throws DuplicatePoints when two inputs coincide.
std::vector<std::size_t> greedy_order(const std::vector<SpaceTimePoint>& points);

}  // namespace torusheat
