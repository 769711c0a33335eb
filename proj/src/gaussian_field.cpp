#include "torusheat/gaussian_field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "torusheat/errors.hpp"
#include "torusheat/fft.hpp"
#include "torusheat/heat_kernel.hpp"
#include "torusheat/rng.hpp"

namespace torusheat {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPiSq = kPi * kPi;

// Salt tags separating the independent noise consumers of one seed.
constexpr std::uint64_t kTagCosine = 1;
constexpr std::uint64_t kTagSine = 2;
constexpr std::uint64_t kTagSmallBall = 3;
constexpr std::uint64_t kTagSlnd = 4;

// Per-(dt, n_modes) transition coefficients, cached because solvers call
// evolve() with one fixed dt millions of times. Pure function of (dt, n),
// so caching cannot change any result.
struct TransitionTable {
  double dt = -1.0;
  std::vector<double> decay;  // e^{-pi^2 n^2 dt}
  std::vector<double> sdev;   // sqrt((1 - e^{-2 pi^2 n^2 dt})/(2 pi^2 n^2))
};

const TransitionTable& transition_table(double dt, int n_modes) {
  thread_local TransitionTable table;
  if (table.dt != dt ||
      table.decay.size() != static_cast<std::size_t>(n_modes) + 1) {
    table.dt = dt;
    table.decay.assign(n_modes + 1, 0.0);
    table.sdev.assign(n_modes + 1, 0.0);
    table.decay[0] = 1.0;
    table.sdev[0] = std::sqrt(dt);
    for (int n = 1; n <= n_modes; ++n) {
      double a = kPiSq * double(n) * n;
      table.decay[n] = std::exp(-a * dt);
      table.sdev[n] = std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
    }
  }
  return table;
}

void evolve_block(std::vector<double>& amp, const TransitionTable& tab,
                  NormalStream& noise, int first_mode) {
  for (std::size_t n = first_mode; n < amp.size(); ++n) {
    amp[n] = tab.decay[n] * amp[n] + tab.sdev[n] * noise();
  }
}

void check_dt(double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("evolve: need dt > 0");
  }
}

double eval_coord(const std::vector<double>& cosc,
                  const std::vector<double>& sinc, double x) {
  const int n_modes = static_cast<int>(cosc.size()) - 1;
  double acc = cosc[0] / std::numbers::sqrt2;
  double c1 = std::cos(kPi * x), s1 = std::sin(kPi * x);
  double cn = 1.0, sn = 0.0;
  for (int n = 1; n <= n_modes; ++n) {
    if (n % 256 == 0) {  // re-anchor the recurrence against drift
      cn = std::cos(kPi * n * x);
      sn = std::sin(kPi * n * x);
    } else {
      double c = cn * c1 - sn * s1;
      double s = sn * c1 + cn * s1;
      cn = c;
      sn = s;
    }
    acc += cosc[n] * cn + sinc[n] * sn;
  }
  return acc;
}

}  // namespace

int default_n_modes(double t_min) {
  if (!(t_min > 0.0)) {
    throw std::invalid_argument("default_n_modes: need t_min > 0");
  }
  double n = std::ceil(8.0 / std::sqrt(t_min));
  return std::max(64, static_cast<int>(n));
}

SpectralState make_state(int p, int n_modes, std::uint64_t seed,
                         std::uint64_t replica) {
  if (p < 1 || n_modes < 0) {
    throw std::invalid_argument("make_state: need p >= 1 and n_modes >= 0");
  }
  SpectralState state;
  state.n_modes = n_modes;
  state.seed = seed;
  state.replica = replica;
  state.cosine_coeffs.assign(p, std::vector<double>(n_modes + 1, 0.0));
  state.sine_coeffs.assign(p, std::vector<double>(n_modes + 1, 0.0));
  return state;
}

void evolve(SpectralState& state, double dt) {
  check_dt(dt);
  const auto& tab = transition_table(dt, state.n_modes);
  const long step = state.step + 1;
  for (int i = 0; i < state.dim(); ++i) {
    NormalStream cos_noise(derive_stream(
        state.seed, {kTagCosine, state.replica, std::uint64_t(i),
                     std::uint64_t(step)}));
    evolve_block(state.cosine_coeffs[i], tab, cos_noise, 0);
    NormalStream sin_noise(derive_stream(
        state.seed, {kTagSine, state.replica, std::uint64_t(i),
                     std::uint64_t(step)}));
    evolve_block(state.sine_coeffs[i], tab, sin_noise, 1);
  }
  state.t += dt;
  state.step = step;
}

void evolve_cos_only(SpectralState& state, double dt) {
  check_dt(dt);
  const auto& tab = transition_table(dt, state.n_modes);
  const long step = state.step + 1;
  for (int i = 0; i < state.dim(); ++i) {
    NormalStream cos_noise(derive_stream(
        state.seed, {kTagCosine, state.replica, std::uint64_t(i),
                     std::uint64_t(step)}));
    evolve_block(state.cosine_coeffs[i], tab, cos_noise, 0);
  }
  state.t += dt;
  state.step = step;
}

std::vector<double> eval_at(const SpectralState& state, double x) {
  std::vector<double> out(state.dim());
  for (int i = 0; i < state.dim(); ++i) {
    out[i] = eval_coord(state.cosine_coeffs[i], state.sine_coeffs[i], x);
  }
  return out;
}

std::vector<double> render(const SpectralState& state,
                           const std::vector<double>& sites, exec policy) {
  const int p = state.dim();
  const long n_sites = static_cast<long>(sites.size());
  std::vector<double> out(static_cast<std::size_t>(n_sites) * p);
  if (policy == exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long j = 0; j < n_sites; ++j) {
      for (int i = 0; i < p; ++i) {
        out[j * p + i] =
            eval_coord(state.cosine_coeffs[i], state.sine_coeffs[i], sites[j]);
      }
    }
  } else {
    for (long j = 0; j < n_sites; ++j) {
      for (int i = 0; i < p; ++i) {
        out[j * p + i] =
            eval_coord(state.cosine_coeffs[i], state.sine_coeffs[i], sites[j]);
      }
    }
  }
  return out;
}

void render_uniform_fft_coord(const SpectralState& state, int coord,
                              int grid_size, double* out) {
  const int n_modes = state.n_modes;
  if (grid_size < 4 || grid_size % 2 != 0 || grid_size < 2 * n_modes + 2) {
    throw std::invalid_argument(
        "render_uniform_fft: need even grid_size >= max(4, 2 n_modes + 2)");
  }
  if (coord < 0 || coord >= state.dim()) {
    throw std::invalid_argument("render_uniform_fft: coordinate out of range");
  }
  // x_j = -1 + 2j/J, so cos(pi n x_j) = (-1)^n cos(2 pi n j / J) and the
  // (-1)^n lands on the packed spectrum.
  std::vector<std::complex<double>> spec(grid_size / 2 + 1, {0.0, 0.0});
  spec[0] = {state.cosine_coeffs[coord][0] / std::numbers::sqrt2, 0.0};
  for (int n = 1; n <= n_modes; ++n) {
    double sign = (n % 2 == 0) ? 1.0 : -1.0;
    spec[n] = {sign * state.cosine_coeffs[coord][n] / 2.0,
               -sign * state.sine_coeffs[coord][n] / 2.0};
  }
  RealFft fft(grid_size);
  fft.inverse(spec.data(), out);
}

std::vector<double> render_uniform_fft(const SpectralState& state,
                                       int grid_size) {
  const int p = state.dim();
  std::vector<double> out(static_cast<std::size_t>(grid_size) * p);
  std::vector<double> line(grid_size);
  for (int i = 0; i < p; ++i) {
    render_uniform_fft_coord(state, i, grid_size, line.data());
    for (long j = 0; j < grid_size; ++j) out[j * p + i] = line[j];
  }
  return out;
}

FieldSample sample_grid(const std::vector<double>& times,
                        const std::vector<double>& sites, int p, int n_modes,
                        std::uint64_t seed, exec policy) {
  if (!std::is_sorted(times.begin(), times.end())) {
    throw std::invalid_argument("sample_grid: times must be sorted ascending");
  }
  if (!times.empty() && times.front() < 0.0) {
    throw std::invalid_argument("sample_grid: times must be >= 0");
  }
  FieldSample sample;
  sample.times = times;
  sample.sites.reserve(sites.size());
  for (double x : sites) sample.sites.push_back(torus_wrap(x));
  if (!std::is_sorted(sample.sites.begin(), sample.sites.end())) {
    throw std::invalid_argument(
        "sample_grid: sites must be sorted ascending after wrapping");
  }
  sample.p = p;
  sample.n_modes = n_modes;
  sample.seed = seed;
  sample.values.reserve(times.size() * sites.size() * p);

  SpectralState state = make_state(p, n_modes, seed, /*replica=*/0);
  for (double t : times) {
    if (t > state.t) evolve(state, t - state.t);
    auto slice = render(state, sample.sites, policy);
    sample.values.insert(sample.values.end(), slice.begin(), slice.end());
  }
  return sample;
}

double conditional_variance(const ConditioningProblem& problem, int n_modes,
                            bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (!(problem.target.t > 0.0)) {
    throw std::invalid_argument("conditional_variance: need target time > 0");
  }
  auto cov = [&](const SpaceTimePoint& a, const SpaceTimePoint& b) {
    return n_modes > 0
               ? covariance_of_H_truncated(a.t, a.x, b.t, b.x, n_modes)
               : covariance_of_H(a.t, a.x, b.t, b.x);
  };
  double var = cov(problem.target, problem.target);
  const std::size_t m = problem.conditioners.size();
  if (m == 0) return var;

  // Canonical order makes the whole computation exactly permutation
  // invariant; it also puts duplicates side by side.
  std::vector<std::pair<double, double>> keyed(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& c = problem.conditioners[j];
    if (!(c.t > 0.0)) {
      throw std::invalid_argument(
          "conditional_variance: conditioner times must be > 0");
    }
    keyed[j] = {c.t, torus_wrap(c.x)};
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t j = 1; j < m; ++j) {
    if (keyed[j] == keyed[j - 1]) {
      throw DuplicatePoints("conditional_variance: coincident conditioners");
    }
  }

  Eigen::MatrixXd gram(m, m);
  Eigen::VectorXd cross(m);
  for (std::size_t a = 0; a < m; ++a) {
    SpaceTimePoint pa{keyed[a].first, keyed[a].second};
    cross(a) = cov(problem.target, pa);
    for (std::size_t b = 0; b <= a; ++b) {
      SpaceTimePoint pb{keyed[b].first, keyed[b].second};
      gram(a, b) = gram(b, a) = cov(pa, pb);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double clip = 1e-12 * std::max(gram.trace(), 0.0);
  double explained = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double lambda = es.eigenvalues()(k);
    if (lambda <= clip) {
      if (degenerate) *degenerate = true;
      continue;
    }
    double proj = es.eigenvectors().col(k).dot(cross);
    explained += proj * proj / lambda;
  }
  return std::max(var - explained, 0.0);
}

SlndReport slnd_ratio_scan(double T, int m_max, int n_configs,
                           std::uint64_t seed, int n_modes) {
  if (!(T > 0.0) || m_max < 0 || n_configs < 1) {
    throw std::invalid_argument(
        "slnd_ratio_scan: need T > 0, m_max >= 0, n_configs >= 1");
  }
  SlndReport report;
  report.configs.reserve(n_configs);
  report.min_ratio = std::numeric_limits<double>::infinity();
  report.max_ratio = 0.0;

  for (int cfg = 0; cfg < n_configs; ++cfg) {
    NormalStream stream(
        derive_stream(seed, {kTagSlnd, std::uint64_t(cfg)}));
    auto draw_point = [&] {
      double t = T / 10.0 + stream.uniform01() * (T - T / 10.0);
      double x = torus_wrap(-1.0 + 2.0 * stream.uniform01());
      return SpaceTimePoint{t, x};
    };

    SlndConfigResult r;
    r.target = draw_point();
    r.m = static_cast<int>(stream.uniform01() * (m_max + 1));
    if (r.m > m_max) r.m = m_max;

    ConditioningProblem problem;
    problem.target = r.target;
    double min_sep = std::numeric_limits<double>::infinity();
    for (int j = 0; j < r.m; ++j) {
      auto c = draw_point();
      if (c.t == r.target.t && torus_wrap(c.x) == torus_wrap(r.target.x)) {
        r.skipped = true;  // degenerate draw: conditioner at the target
      }
      min_sep = std::min(min_sep, std::sqrt(std::fabs(r.target.t - c.t)) +
                                      torus_dist(r.target.x, c.x));
      problem.conditioners.push_back(c);
    }
    if (!r.skipped) {
      try {
        r.cond_var = conditional_variance(problem, n_modes);
      } catch (const DuplicatePoints&) {
        r.skipped = true;  // two conditioners coincided
      }
    }
    if (!r.skipped) {
      r.denom = std::min(std::sqrt(r.target.t), min_sep);
      r.ratio = r.cond_var / r.denom;
      report.min_ratio = std::min(report.min_ratio, r.ratio);
      report.max_ratio = std::max(report.max_ratio, r.ratio);
    } else {
      ++report.n_skipped;
    }
    report.configs.push_back(std::move(r));
  }
  return report;
}

SmallBallReport small_ball_product_check(
    const std::vector<SpaceTimePoint>& points, double eps, long n_mc,
    std::uint64_t seed) {
  if (points.empty() || !(eps > 0.0) || n_mc < 1) {
    throw std::invalid_argument(
        "small_ball_product_check: need points, eps > 0, n_mc >= 1");
  }
  const std::size_t n = points.size();
  SmallBallReport report;
  report.eps = eps;
  report.n_mc = n_mc;

  // Successive conditioning in the given order.
  report.bound = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    ConditioningProblem problem;
    problem.target = points[i];
    problem.conditioners.assign(points.begin(), points.begin() + i);
    bool deg = false;
    double cv = conditional_variance(problem, 0, &deg);
    report.degenerate = report.degenerate || deg;
    report.cond_vars.push_back(cv);
    if (cv < 1e-300) {
      report.bound = std::numeric_limits<double>::infinity();
    } else {
      report.bound *= 2.0 * eps / std::sqrt(2.0 * kPi * cv);
    }
  }

  // Monte Carlo of the joint vector through the exact Gram factor.
  Eigen::MatrixXd gram(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      gram(a, b) = gram(b, a) =
          covariance_of_H(points[a].t, points[a].x, points[b].t, points[b].x);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  Eigen::MatrixXd factor =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  long hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (long r = 0; r < n_mc; ++r) {
    NormalStream noise(
        derive_stream(seed, {kTagSmallBall, std::uint64_t(r)}));
    Eigen::VectorXd g(n);
    for (std::size_t i = 0; i < n; ++i) g(i) = noise();
    Eigen::VectorXd z = factor * g;
    if (z.cwiseAbs().maxCoeff() <= eps) ++hits;
  }
  report.mc_estimate = double(hits) / double(n_mc);
  report.mc_stderr = std::sqrt(
      std::max(report.mc_estimate * (1.0 - report.mc_estimate), 0.0) /
      double(n_mc));
  report.consistent =
      report.mc_estimate <= report.bound + 3.0 * report.mc_stderr;
  return report;
}

}  // namespace torusheat
