// The OpenMP kernels must reproduce the serial reference implementations
// bit for bit, and parallel results must not depend on the thread count.

#include <vector>

#include "doctest.h"
#include "torusheat/fractal.hpp"
#include "torusheat/gaussian_field.hpp"
#include "torusheat/parallel.hpp"
#include "torusheat/rng.hpp"
#include "torusheat/spde.hpp"

using namespace torusheat;

namespace {

std::vector<double> scattered_sites(int n, std::uint64_t salt) {
  NormalStream g(derive_stream(2026, {salt}));
  std::vector<double> sites(static_cast<std::size_t>(n));
  for (double& x : sites) x = -1.0 + 2.0 * g.uniform01();
  return sites;
}

PointCloud gaussian_cloud(long n, int dim, std::uint64_t salt) {
  NormalStream g(derive_stream(2026, {salt}));
  PointCloud cloud;
  cloud.dim = dim;
  cloud.provenance = "test";
  cloud.points.resize(static_cast<std::size_t>(n * dim));
  for (double& v : cloud.points) v = g();
  return cloud;
}

struct ThreadGuard {
  int saved = max_threads();
  ~ThreadGuard() { set_threads(saved); }
};

}  // namespace

TEST_SUITE_BEGIN("parallel");

TEST_CASE("render: serial and parallel agree bit for bit") {
  for (int p : {1, 3}) {
    SpectralState state = make_state(p, 777, 2026, 4);
    evolve(state, 0.37);
    const std::vector<double> sites = scattered_sites(4097, 11);
    const std::vector<double> a = render(state, sites, exec::serial);
    const std::vector<double> b = render(state, sites, exec::parallel);
    CHECK(a == b);
  }
}

TEST_CASE("sample_grid: serial and parallel agree bit for bit") {
  const std::vector<double> times = {0.1, 0.25, 0.5, 1.0};
  std::vector<double> sites;
  for (int j = 0; j < 97; ++j) sites.push_back(-1.0 + 2.0 * j / 97.0);
  const FieldSample a = sample_grid(times, sites, 2, 300, 555, exec::serial);
  const FieldSample b = sample_grid(times, sites, 2, 300, 555, exec::parallel);
  CHECK(a.values == b.values);
}

TEST_CASE("box_count: serial and parallel agree exactly") {
  const PointCloud cloud = gaussian_cloud(50000, 3, 12);
  for (int j : {0, 2, 5, 9}) {
    CHECK(box_count(cloud, j, exec::serial) ==
          box_count(cloud, j, exec::parallel));
  }
}

TEST_CASE("anisotropic_box_count: serial and parallel agree exactly") {
  PointCloud cloud = gaussian_cloud(40000, 2, 13);
  for (std::size_t k = 0; k < cloud.points.size(); k += 2) {
    cloud.points[k] = 0.5 + 0.1 * cloud.points[k];
  }
  AnisotropicMetric metric;
  metric.exponents = {0.25, 0.5};
  for (int j : {1, 3, 5}) {
    CHECK(anisotropic_box_count(cloud, j, metric, exec::serial) ==
          anisotropic_box_count(cloud, j, metric, exec::parallel));
  }
}

TEST_CASE("solve_ensemble: serial and parallel trajectories are identical") {
  SolverConfig cfg;
  cfg.p = 2;
  cfg.n_sites = 128;
  cfg.dt = 2e-4;
  cfg.t_end = 0.02;
  cfg.seed = 404;
  cfg.snapshot_times = {0.01, 0.02};
  const Coefficients coeffs = make_coefficients("saturating", "sin_diag", 2);
  const std::vector<Trajectory> a = solve_ensemble(cfg, coeffs, 6, exec::serial);
  const std::vector<Trajectory> b =
      solve_ensemble(cfg, coeffs, 6, exec::parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sample.values == b[i].sample.values);
    CHECK(a[i].sup_norm == b[i].sup_norm);
    CHECK(a[i].min_lambda == b[i].min_lambda);
  }
}

TEST_CASE("thread count does not change parallel results") {
  ThreadGuard guard;
  SpectralState state = make_state(2, 512, 99, 0);
  evolve(state, 0.8);
  const std::vector<double> sites = scattered_sites(1025, 14);
  const PointCloud cloud = gaussian_cloud(30000, 2, 15);

  set_threads(1);
  const std::vector<double> r1 = render(state, sites, exec::parallel);
  const long c1 = box_count(cloud, 6, exec::parallel);
  set_threads(4);
  const std::vector<double> r4 = render(state, sites, exec::parallel);
  const long c4 = box_count(cloud, 6, exec::parallel);

  CHECK(r1 == r4);
  CHECK(c1 == c4);
}

TEST_SUITE_END();
