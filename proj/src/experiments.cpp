#include "torusheat/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "torusheat/errors.hpp"
#include "torusheat/heat_kernel.hpp"
#include "torusheat/linreg.hpp"
#include "torusheat/quadrature.hpp"
#include "torusheat/rng.hpp"
#include "torusheat/torus.hpp"

namespace torusheat {

namespace {

std::vector<double> logspace(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi > 0.0)) {
    throw std::invalid_argument("logspace: need n >= 1 and positive bounds");
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double la = std::log(lo);
  const double lb = std::log(hi);
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        std::exp(la + (lb - la) * static_cast<double>(i) /
                          static_cast<double>(n - 1));
  }
  return out;
}

std::string fmt_g(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

// --- ExperimentResult helpers ------------------------------------------------

bool ExperimentResult::all_pass() const {
  for (const CheckResult& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

const CheckResult* ExperimentResult::find(const std::string& name) const {
  for (const CheckResult& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double ExperimentResult::value(const std::string& name) const {
  for (const auto& kv : values) {
    if (kv.first == name) return kv.second;
  }
  throw std::out_of_range("ExperimentResult::value: no value named " + name);
}

namespace {
// Check names must be unique within an experiment: the manifest promises
// each named assertion appears exactly once.
void require_fresh(const ExperimentResult& res, const std::string& name) {
  if (res.find(name) != nullptr) {
    throw std::logic_error("duplicate check name: " + name);
  }
}
}  // namespace

void ExperimentResult::check_in(const std::string& name, double measured,
                                double lo, double hi) {
  require_fresh(*this, name);
  CheckResult c;
  c.name = name;
  c.measured = measured;
  c.pass = std::isfinite(measured) && measured >= lo && measured <= hi;
  c.detail = "measured " + fmt_g(measured) + ", required in [" + fmt_g(lo) +
             ", " + fmt_g(hi) + "]";
  checks.push_back(std::move(c));
}

void ExperimentResult::check_le(const std::string& name, double measured,
                                double bound) {
  require_fresh(*this, name);
  CheckResult c;
  c.name = name;
  c.measured = measured;
  c.pass = std::isfinite(measured) && measured <= bound;
  c.detail = "measured " + fmt_g(measured) + ", required <= " + fmt_g(bound);
  checks.push_back(std::move(c));
}

void ExperimentResult::check_true(const std::string& name, bool pass,
                                  double measured, const std::string& detail) {
  require_fresh(*this, name);
  CheckResult c;
  c.name = name;
  c.measured = measured;
  c.pass = pass;
  c.detail = detail;
  checks.push_back(std::move(c));
}

// --- Heat-kernel analytics ---------------------------------------------------

ExperimentResult kernel_duality_experiment(const KernelDualityConfig& cfg) {
  if (cfg.n_samples < 1 || !(cfg.r_lo > 0.0) || !(cfg.r_hi >= cfg.r_lo)) {
    throw std::invalid_argument("kernel_duality: bad sampling plan");
  }
  ExperimentResult res;
  res.experiment = "kernel-duality";
  res.table_header = {"r", "a", "b", "image_sum", "fourier", "abs_diff"};
  NormalStream rng(derive_stream(cfg.seed, {101}));
  const double lr_lo = std::log(cfg.r_lo);
  const double lr_hi = std::log(cfg.r_hi);
  double max_diff = 0.0, worst_r = cfg.r_lo, worst_a = 0.0, worst_b = 0.0;
  for (int i = 0; i < cfg.n_samples; ++i) {
    const double r = std::exp(lr_lo + (lr_hi - lr_lo) * rng.uniform01());
    const double a = -1.0 + 2.0 * rng.uniform01();
    const double b = -1.0 + 2.0 * rng.uniform01();
    const double gi = kernel_image_sum(r, a, b);
    const double gf = kernel_fourier(r, a, b);
    const double diff = std::fabs(gi - gf);
    if (!(diff <= max_diff)) {
      max_diff = diff;
      worst_r = r;
      worst_a = a;
      worst_b = b;
    }
    res.table.push_back({r, a, b, gi, gf, diff});
  }
  res.values = {{"max_abs_diff", max_diff},
                {"worst_r", worst_r},
                {"worst_a", worst_a},
                {"worst_b", worst_b},
                {"n_samples", static_cast<double>(cfg.n_samples)}};
  res.check_le("representations-agree", max_diff, cfg.tol);
  return res;
}

ExperimentResult kernel_laws_experiment(const KernelLawsConfig& cfg) {
  ExperimentResult res;
  res.experiment = "kernel-laws";
  res.table_header = {"t", "mass_error", "sup", "sup_lower", "sup_upper"};
  const std::vector<double> t_grid = logspace(cfg.t_lo, cfg.t_hi, cfg.n_t);

  // Sup bounds (and diagonal-dominance) first: the library check throws on
  // the first offending t, which we convert into a failing named check.
  std::vector<SupBoundsRow> bounds;
  bool sup_ok = true;
  std::string sup_detail = "lower <= sup G_t <= upper on all " +
                           std::to_string(cfg.n_t) + " times";
  try {
    bounds = kernel_sup_bounds_check(t_grid);
  } catch (const BoundViolation& e) {
    sup_ok = false;
    sup_detail = e.what();
  }

  // Conservation: the kernel depends on a - b only, so total mass is
  // 2 int_0^1 G_t(0, z) dz, with the peak at the quadrature endpoint where
  // tanh-sinh nodes cluster.
  double max_mass_err = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double mass =
        2.0 * integrate([t](double z) { return kernel_value(t, 0.0, z); }, 0.0,
                        1.0, 1e-12);
    const double err = std::fabs(mass - 1.0);
    max_mass_err = std::max(max_mass_err, err);
    if (!bounds.empty()) {
      res.table.push_back(
          {t, err, bounds[i].sup, bounds[i].lower, bounds[i].upper});
    } else {
      res.table.push_back({t, err, 0.0, 0.0, 0.0});
    }
  }

  // Semigroup identity at random configurations: quadrature of
  // int G_s(a, y) G_t(y, b) dy against G_{s+t}(a, b).
  NormalStream rng(derive_stream(cfg.seed, {211}));
  double max_ck_err = 0.0;
  for (int i = 0; i < cfg.n_ck; ++i) {
    const double s = std::exp(std::log(1e-3) + std::log(1e3) * rng.uniform01());
    const double t = std::exp(std::log(1e-3) + std::log(1e3) * rng.uniform01());
    const double a = -1.0 + 2.0 * rng.uniform01();
    const double b = -1.0 + 2.0 * rng.uniform01();
    const double composed = integrate(
        [s, t, a, b](double y) {
          return kernel_value(s, a, y) * kernel_value(t, y, b);
        },
        -1.0, 1.0, 1e-11);
    const double direct = kernel_value(s + t, a, b);
    max_ck_err = std::max(max_ck_err, std::fabs(composed - direct));
  }

  res.values = {{"max_mass_error", max_mass_err},
                {"max_semigroup_error", max_ck_err}};
  res.check_le("mass-conserved", max_mass_err, cfg.tol_conservation);
  res.check_le("semigroup-identity", max_ck_err, cfg.tol_ck);
  res.check_true("sup-bounds", sup_ok, sup_ok ? 1.0 : 0.0, sup_detail);
  return res;
}

ExperimentResult variance_experiment(const VarianceChecksConfig& cfg) {
  ExperimentResult res;
  res.experiment = "variance";
  res.table_header = {"t", "series", "quadrature", "abs_diff"};
  const std::vector<double> t_grid = logspace(cfg.t_lo, cfg.t_hi, cfg.n_t);
  double max_diff = 0.0;
  for (double t : t_grid) {
    const double series = variance_of_H(t);
    // Independent oracle: Var H(t, x) = int_0^t G_{2s}(0, 0) ds. The
    // integrand blows up like (8 pi s)^{-1/2} at s = 0, which tanh-sinh
    // absorbs at its endpoint.
    const double quad = integrate(
        [](double s) { return kernel_value(2.0 * s, 0.0, 0.0); }, 0.0, t,
        1e-11);
    const double diff = std::fabs(series - quad);
    max_diff = std::max(max_diff, diff);
    res.table.push_back({t, series, quad, diff});
  }
  const double ratio = variance_of_H(cfg.ratio_t) / std::sqrt(cfg.ratio_t);
  res.values = {{"max_abs_diff", max_diff}, {"small_time_ratio", ratio}};
  res.notes.push_back(
      "small-time asymptote: Var H(t)/sqrt(t) -> 1/sqrt(2 pi) = 0.398942 "
      "under this kernel normalization; the candidate constant sqrt(t/pi) "
      "(ratio 0.564190) does not fit and is reported here, not asserted");
  res.check_le("series-vs-quadrature", max_diff, cfg.tol);
  res.check_in("small-time-ratio", ratio, cfg.ratio_lo, cfg.ratio_hi);
  return res;
}

ExperimentResult increment_bounds_experiment(const IncrementBoundsConfig& cfg) {
  ExperimentResult res;
  res.experiment = "increment-bounds";
  res.table_header = {"t", "sep", "spatial_energy", "spatial_ratio",
                      "temporal_energy", "temporal_ratio"};
  const std::vector<double> t_grid = logspace(cfg.t_lo, cfg.t_hi, cfg.n_t);
  const std::vector<double> seps = logspace(cfg.sep_lo, cfg.sep_hi, cfg.n_sep);
  double max_spatial = 0.0, max_temporal = 0.0;
  bool finite = true;
  for (double t : t_grid) {
    for (double d : seps) {
      const double se = spatial_increment_energy(t, 0.0, d);
      const double sr = se / std::min(std::sqrt(t), d);
      const double te = temporal_increment_energy(t, t + d);
      const double tr = te / std::sqrt(d);
      finite = finite && std::isfinite(sr) && std::isfinite(tr);
      max_spatial = std::max(max_spatial, sr);
      max_temporal = std::max(max_temporal, tr);
      res.table.push_back({t, d, se, sr, te, tr});
    }
  }
  res.values = {{"max_spatial_ratio", max_spatial},
                {"max_temporal_ratio", max_temporal}};
  res.check_true("ratios-finite", finite, finite ? 1.0 : 0.0,
                 "every energy/scale ratio evaluated finite");
  res.check_le("spatial-energy-to-scale", max_spatial, cfg.max_ratio);
  res.check_le("temporal-energy-to-scale", max_temporal, cfg.max_ratio);
  return res;
}

// --- Gaussian-field statistics -------------------------------------------

ExperimentResult slnd_experiment(const SlndScanConfig& cfg) {
  ExperimentResult res;
  res.experiment = "slnd";
  res.table_header = {"t", "x", "m", "cond_var", "denom", "ratio"};
  const SlndReport rep1 =
      slnd_ratio_scan(cfg.T, cfg.m_max, cfg.n_configs, cfg.seed, cfg.n_modes);
  const SlndReport rep2 = slnd_ratio_scan(cfg.T, cfg.m_max, cfg.n_configs,
                                          cfg.seed, 2 * cfg.n_modes);
  for (const SlndConfigResult& c : rep1.configs) {
    if (c.skipped) continue;
    res.table.push_back({c.target.t, c.target.x, static_cast<double>(c.m),
                         c.cond_var, c.denom, c.ratio});
  }
  const double min_stab =
      std::max(rep1.min_ratio / rep2.min_ratio, rep2.min_ratio / rep1.min_ratio);
  const double max_stab =
      std::max(rep1.max_ratio / rep2.max_ratio, rep2.max_ratio / rep1.max_ratio);
  res.values = {{"min_ratio", rep1.min_ratio},
                {"max_ratio", rep1.max_ratio},
                {"min_ratio_refined", rep2.min_ratio},
                {"max_ratio_refined", rep2.max_ratio},
                {"n_skipped", static_cast<double>(rep1.n_skipped)}};
  res.check_in("min-ratio", rep1.min_ratio, cfg.ratio_lo, cfg.ratio_hi);
  res.check_in("max-ratio", rep1.max_ratio, cfg.ratio_lo, cfg.ratio_hi);
  res.check_le("min-ratio-stable-under-refinement", min_stab,
               cfg.stability_factor);
  res.check_le("max-ratio-stable-under-refinement", max_stab,
               cfg.stability_factor);
  return res;
}

ExperimentResult sampler_exactness_experiment(
    const SamplerExactnessConfig& cfg) {
  if (cfg.n_replicas < 100) {
    throw std::invalid_argument("sampler_exactness: need >= 100 replicas");
  }
  ExperimentResult res;
  res.experiment = "sampler-exactness";
  res.table_header = {"k", "l",          "t_k",       "x_k", "t_l", "x_l",
                      "closed_form", "empirical", "z"};
  std::vector<SpaceTimePoint> probes = cfg.probes;
  if (probes.empty()) {
    probes = {{0.05, -0.9}, {0.1, 0.3},   {0.25, -0.25},
              {0.5, 0.5},   {0.75, -0.6}, {1.0, 0.0}};
  }
  const std::size_t K = probes.size();

  // The sampler draws a joint time x site grid; each probe is one grid
  // entry. Build the sorted unique axes and remember where each probe
  // landed.
  std::vector<double> times, sites;
  for (const SpaceTimePoint& q : probes) {
    times.push_back(q.t);
    sites.push_back(q.x);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  std::vector<std::size_t> ti(K), si(K);
  for (std::size_t k = 0; k < K; ++k) {
    ti[k] = static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.end(), probes[k].t) -
        times.begin());
    si[k] = static_cast<std::size_t>(
        std::lower_bound(sites.begin(), sites.end(), probes[k].x) -
        sites.begin());
  }

  const long n = cfg.n_replicas;
  std::vector<double> vals(static_cast<std::size_t>(n) * K);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < n; ++r) {
    const FieldSample fs =
        sample_grid(times, sites, 1, cfg.n_modes,
                    derive_stream(cfg.seed, {1799, static_cast<std::uint64_t>(r)}),
                    exec::serial);
    for (std::size_t k = 0; k < K; ++k) {
      vals[static_cast<std::size_t>(r) * K + k] =
          fs.values[ti[k] * sites.size() + si[k]];
    }
  }

  // Closed-form covariance of the truncated law actually sampled.
  std::vector<double> cov(K * K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < K; ++l) {
      cov[k * K + l] =
          covariance_of_H_truncated(probes[k].t, probes[k].x, probes[l].t,
                                    probes[l].x, cfg.n_modes);
    }
  }

  double max_mean_z = 0.0, max_moment_z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double mean = 0.0;
    for (long r = 0; r < n; ++r) {
      mean += vals[static_cast<std::size_t>(r) * K + k];
    }
    mean /= static_cast<double>(n);
    const double z =
        std::fabs(mean) / std::sqrt(cov[k * K + k] / static_cast<double>(n));
    max_mean_z = std::max(max_mean_z, z);
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = k; l < K; ++l) {
      double m2 = 0.0;
      for (long r = 0; r < n; ++r) {
        m2 += vals[static_cast<std::size_t>(r) * K + k] *
              vals[static_cast<std::size_t>(r) * K + l];
      }
      m2 /= static_cast<double>(n);
      // Gaussian fourth-moment identity: Var(X_k X_l) =
      // c_kk c_ll + c_kl^2.
      const double se = std::sqrt(
          (cov[k * K + k] * cov[l * K + l] + cov[k * K + l] * cov[k * K + l]) /
          static_cast<double>(n));
      const double z = std::fabs(m2 - cov[k * K + l]) / se;
      max_moment_z = std::max(max_moment_z, z);
      res.table.push_back({static_cast<double>(k), static_cast<double>(l),
                           probes[k].t, probes[k].x, probes[l].t, probes[l].x,
                           cov[k * K + l], m2, z});
    }
  }
  res.values = {{"max_moment_z", max_moment_z},
                {"max_mean_z", max_mean_z},
                {"n_replicas", static_cast<double>(n)}};
  res.check_le("second-moments-within-se", max_moment_z, cfg.max_sigmas);
  res.check_le("means-within-se", max_mean_z, cfg.max_sigmas);
  return res;
}

ExperimentResult small_ball_experiment(const SmallBallConfig& cfg) {
  if (cfg.m_max < 2 || cfg.n_configs < 1) {
    throw std::invalid_argument("small_ball: need m_max >= 2, n_configs >= 1");
  }
  ExperimentResult res;
  res.experiment = "small-ball";
  res.table_header = {"config", "m",         "eps",        "bound",
                      "mc_estimate", "mc_stderr", "consistent"};
  NormalStream rng(derive_stream(cfg.seed, {7100}));
  int n_bad = 0, n_degenerate = 0;
  for (int c = 0; c < cfg.n_configs; ++c) {
    const int m =
        2 + static_cast<int>(rng.uniform01() * static_cast<double>(cfg.m_max - 1));
    std::vector<SpaceTimePoint> pts;
    // Regenerate until the configuration is well separated so the
    // successive conditional variances stay away from the clipping floor.
    for (int attempt = 0; attempt < 256; ++attempt) {
      pts.clear();
      for (int i = 0; i < m; ++i) {
        pts.push_back({0.1 + 0.9 * rng.uniform01(), -1.0 + 2.0 * rng.uniform01()});
      }
      double min_sep = 1e300;
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          min_sep = std::min(min_sep, parabolic_dist(pts[static_cast<std::size_t>(i)],
                                                     pts[static_cast<std::size_t>(j)]));
        }
      }
      if (min_sep > 0.05) break;
    }
    const std::vector<std::size_t> order = greedy_order(pts);
    std::vector<SpaceTimePoint> ordered(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ordered[i] = pts[order[i]];
    }
    for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
      const double eps = cfg.epsilons[ei];
      const SmallBallReport rep = small_ball_product_check(
          ordered, eps, cfg.n_mc,
          derive_stream(cfg.seed, {7200, static_cast<std::uint64_t>(c),
                                   static_cast<std::uint64_t>(ei)}));
      if (!rep.consistent) ++n_bad;
      if (rep.degenerate) ++n_degenerate;
      res.table.push_back({static_cast<double>(c), static_cast<double>(m), eps,
                           rep.bound, rep.mc_estimate, rep.mc_stderr,
                           rep.consistent ? 1.0 : 0.0});
    }
  }
  if (n_degenerate > 0) {
    res.notes.push_back(fmt_g(n_degenerate) +
                        " configurations had a clipped conditional variance");
  }
  res.values = {{"n_inconsistent", static_cast<double>(n_bad)},
                {"n_degenerate", static_cast<double>(n_degenerate)}};
  res.check_le("product-bound-violations", static_cast<double>(n_bad), 0.0);
  return res;
}

// --- Solver rates ------------------------------------------------------------

ExperimentResult linearization_experiment(const LinearizationRateConfig& cfg) {
  ExperimentResult res;
  res.experiment = "linearization";
  res.table_header = {"t", "mean_error", "rms_error", "k4_error"};
  std::vector<double> times = cfg.times;
  if (times.empty()) times = logspace(1e-4, 1e-2, 7);
  for (double& t : times) {
    t = std::max(1.0, std::round(t / cfg.dt)) * cfg.dt;
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  SolverConfig base;
  base.p = cfg.p;
  base.n_sites = cfg.grid_size;
  base.dt = cfg.dt;
  base.replica = cfg.replica;
  const Coefficients coeffs =
      make_coefficients("zero", "sin_diag", cfg.p, cfg.sigma_amplitude);
  const InitialFn u0 = make_initial("cosine", cfg.p, 0.5, 2.0);
  const LinearizationReport rep = linearization_error_scan(
      coeffs, u0, times, static_cast<int>(cfg.n_replicas), cfg.seed, base);
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    res.table.push_back(
        {rep.times[i], rep.mean_error[i], rep.rms_error[i], rep.k4_error[i]});
  }
  res.values = {{"slope_mean", rep.slope_mean},
                {"slope_k2", rep.slope_k2},
                {"slope_k4", rep.slope_k4},
                {"max_error", rep.max_error},
                {"n_replicas", static_cast<double>(rep.n_replicas)}};
  res.check_in("mean-error-rate", rep.slope_mean, cfg.slope_lo, cfg.slope_hi);
  return res;
}

ExperimentResult moments_experiment(const MomentExponentsConfig& cfg) {
  ExperimentResult res;
  res.experiment = "moments";
  res.table_header = {"axis", "sep", "energy", "closed_form"};
  std::vector<double> seps = cfg.spatial_seps;
  if (seps.empty()) seps = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
  std::vector<double> lags = cfg.temporal_lags;
  if (lags.empty()) lags = {0.0064, 0.0128, 0.0256, 0.0512, 0.1024};

  SolverConfig sc;
  sc.p = cfg.p;
  sc.n_sites = cfg.grid_size;
  sc.dt = cfg.dt;
  sc.t_end = cfg.t;
  sc.seed = cfg.seed;
  sc.replica = cfg.replica;
  sc.snapshot_times.push_back(cfg.t);
  for (double s : lags) sc.snapshot_times.push_back(cfg.t - s);
  const Coefficients coeffs = make_coefficients("zero", "identity", cfg.p);
  const std::vector<Trajectory> ens =
      solve_ensemble(sc, coeffs, static_cast<int>(cfg.n_replicas));
  const MomentScanReport scan = increment_moment_scan(ens, cfg.t, seps, lags);

  const double pd = static_cast<double>(cfg.p);
  for (std::size_t i = 0; i < scan.space_sep.size(); ++i) {
    res.table.push_back(
        {0.0, scan.space_sep[i], scan.space_energy[i],
         pd * spatial_increment_energy(cfg.t, 0.0, scan.space_sep[i])});
  }
  for (std::size_t i = 0; i < scan.time_sep.size(); ++i) {
    const double s = scan.time_sep[i];
    // Full temporal increment: the shared-noise window [0, t-s] plus the
    // fresh-noise variance accumulated on (t-s, t].
    res.table.push_back({1.0, s, scan.time_energy[i],
                         pd * (temporal_increment_energy(cfg.t - s, cfg.t) +
                               variance_of_H(s))});
  }
  res.values = {{"slope_space", scan.slope_space},
                {"slope_time", scan.slope_time}};
  res.check_true("energies-nondegenerate", !scan.degenerate,
                 scan.degenerate ? 0.0 : 1.0,
                 "all increment energies strictly positive");
  res.check_in("spatial-exponent", scan.slope_space, cfg.spatial_lo,
               cfg.spatial_hi);
  res.check_in("temporal-exponent", scan.slope_time, cfg.temporal_lo,
               cfg.temporal_hi);
  return res;
}

// --- Dimension experiments -----------------------------------------------

namespace {

// Sum of the cosine series at x = 0: A_0 / sqrt(2) + sum_n A_n.
double eval_cosines_at_origin(const std::vector<double>& coeffs) {
  double tail = 0.0;
  for (std::size_t k = coeffs.size(); k > 1; --k) tail += coeffs[k - 1];
  return coeffs[0] / std::sqrt(2.0) + tail;
}

}  // namespace

ImageDimensionOutcome image_dimension_experiment(
    const ImageDimensionConfig& cfg) {
  const int p = cfg.p;
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("image_dimension: p out of range");
  }
  ImageDimensionOutcome out;
  ExperimentResult& res = out.result;
  res.experiment = "dimension";
  res.table_header = {"j", "count"};

  PointCloud cloud;
  cloud.dim = p;
  double target = 0.0;
  int hypothesis_floor = 0;

  if (cfg.kind == "fixed-time-spatial") {
    hypothesis_floor = 2;
    if (!(cfg.t > 0.0)) {
      throw std::invalid_argument("image_dimension: need t > 0");
    }
    const double dim_f = cfg.use_cantor ? cfg.cantor.dimension() : 1.0;
    target = 2.0 * dim_f;
    if (cfg.diffusion.empty()) {
      if (cfg.use_cantor) {
        const int n_modes = cfg.n_modes > 0 ? cfg.n_modes : (1 << 17) - 1;
        SpectralState st = make_state(p, n_modes, cfg.seed, cfg.replica);
        evolve(st, cfg.t);
        const std::vector<double> sites = cantor_points(cfg.cantor);
        cloud.points = render(st, sites);
        cloud.provenance = "additive field, t = " + fmt_g(cfg.t) + ", " +
                           std::to_string(sites.size()) + " Cantor sites";
      } else {
        const int n_modes =
            cfg.n_modes > 0 ? cfg.n_modes : cfg.grid_size / 2 - 1;
        SpectralState st = make_state(p, n_modes, cfg.seed, cfg.replica);
        evolve(st, cfg.t);
        cloud.points = render_uniform_fft(st, cfg.grid_size);
        cloud.provenance = "additive field, t = " + fmt_g(cfg.t) + ", " +
                           std::to_string(cfg.grid_size) + " uniform sites";
      }
    } else {
      SolverConfig sc;
      sc.p = p;
      sc.n_sites = cfg.grid_size;
      sc.dt = cfg.dt;
      sc.t_end = cfg.t;
      sc.seed = cfg.seed;
      sc.replica = cfg.replica;
      sc.snapshot_times = {cfg.t};
      const Coefficients coeffs = make_coefficients(
          cfg.drift, cfg.diffusion, p, cfg.diffusion_amplitude);
      const Trajectory tr = solve(sc, coeffs);
      if (tr.blew_up) {
        throw ViolationFound("image_dimension: solver run blew up at step " +
                             std::to_string(tr.blow_up_step));
      }
      const std::size_t J = tr.sample.sites.size();
      const std::size_t n_t = tr.sample.times.size();
      const double* last =
          tr.sample.values.data() +
          (n_t - 1) * J * static_cast<std::size_t>(p);
      if (cfg.use_cantor) {
        const std::vector<double> sites = cantor_points(cfg.cantor);
        cloud.points.reserve(sites.size() * static_cast<std::size_t>(p));
        for (double x : sites) {
          long j = std::lround((x + 1.0) * static_cast<double>(J) / 2.0) %
                   static_cast<long>(J);
          if (j < 0) j += static_cast<long>(J);
          for (int i = 0; i < p; ++i) {
            cloud.points.push_back(
                last[static_cast<std::size_t>(j) * static_cast<std::size_t>(p) +
                     static_cast<std::size_t>(i)]);
          }
        }
        res.notes.push_back("Cantor sites snapped to the solver grid, spacing " +
                            fmt_g(2.0 / static_cast<double>(J)));
        cloud.provenance = "solver field (" + cfg.drift + "/" + cfg.diffusion +
                           "), t = " + fmt_g(cfg.t) + ", Cantor sites";
      } else {
        cloud.points.assign(last, last + J * static_cast<std::size_t>(p));
        cloud.provenance = "solver field (" + cfg.drift + "/" + cfg.diffusion +
                           "), t = " + fmt_g(cfg.t) + ", full grid";
      }
    }
  } else if (cfg.kind == "fixed-space-temporal") {
    hypothesis_floor = 4;
    if (!(cfg.t_hi > cfg.t_lo) || !(cfg.t_lo > 0.0) || cfg.n_times < 4) {
      throw std::invalid_argument(
          "image_dimension: temporal kind needs 0 < t_lo < t_hi, n_times >= 4");
    }
    if (!cfg.diffusion.empty()) {
      throw std::invalid_argument(
          "image_dimension: the temporal kind samples the additive field only");
    }
    target = 4.0;
    const int n_modes = cfg.n_modes > 0 ? cfg.n_modes : 4096;
    SpectralState st = make_state(p, n_modes, cfg.seed, cfg.replica);
    const double dt_s =
        (cfg.t_hi - cfg.t_lo) / static_cast<double>(cfg.n_times);
    cloud.points.resize(static_cast<std::size_t>(cfg.n_times) *
                        static_cast<std::size_t>(p));
    if (cfg.x == 0.0) {
      // At the origin only the cosine amplitudes enter, and the reduced
      // cosine-only transition has the exact single-site law.
      evolve_cos_only(st, cfg.t_lo);
      for (long k = 0; k < cfg.n_times; ++k) {
        if (k > 0) evolve_cos_only(st, dt_s);
        for (int i = 0; i < p; ++i) {
          cloud.points[static_cast<std::size_t>(k) *
                           static_cast<std::size_t>(p) +
                       static_cast<std::size_t>(i)] =
              eval_cosines_at_origin(st.cosine_coeffs[static_cast<std::size_t>(i)]);
        }
      }
    } else {
      evolve(st, cfg.t_lo);
      for (long k = 0; k < cfg.n_times; ++k) {
        if (k > 0) evolve(st, dt_s);
        const std::vector<double> v = eval_at(st, cfg.x);
        for (int i = 0; i < p; ++i) {
          cloud.points[static_cast<std::size_t>(k) *
                           static_cast<std::size_t>(p) +
                       static_cast<std::size_t>(i)] =
              v[static_cast<std::size_t>(i)];
        }
      }
    }
    cloud.provenance = "additive field trace at x = " + fmt_g(cfg.x) + ", " +
                       std::to_string(cfg.n_times) + " times in [" +
                       fmt_g(cfg.t_lo) + ", " + fmt_g(cfg.t_hi) + "]";
  } else if (cfg.kind == "space-time") {
    hypothesis_floor = 6;
    if (!(cfg.t_hi > cfg.t_lo) || !(cfg.t_lo > 0.0) || cfg.n_times < 2) {
      throw std::invalid_argument(
          "image_dimension: space-time kind needs 0 < t_lo < t_hi, n_times >= 2");
    }
    if (!cfg.diffusion.empty()) {
      throw std::invalid_argument(
          "image_dimension: the space-time kind samples the additive field only");
    }
    const double dim_f = cfg.use_cantor ? cfg.cantor.dimension() : 1.0;
    target = 4.0 + 2.0 * dim_f;
    const int n_modes = cfg.n_modes > 0 ? cfg.n_modes : cfg.grid_size / 2 - 1;
    SpectralState st = make_state(p, n_modes, cfg.seed, cfg.replica);
    const double dt_s =
        (cfg.t_hi - cfg.t_lo) / static_cast<double>(cfg.n_times);
    std::vector<double> sites;
    if (cfg.use_cantor) sites = cantor_points(cfg.cantor);
    const std::size_t per_slice =
        cfg.use_cantor ? sites.size() : static_cast<std::size_t>(cfg.grid_size);
    cloud.points.reserve(static_cast<std::size_t>(cfg.n_times) * per_slice *
                         static_cast<std::size_t>(p));
    evolve(st, cfg.t_lo);
    for (long k = 0; k < cfg.n_times; ++k) {
      if (k > 0) evolve(st, dt_s);
      const std::vector<double> slice =
          cfg.use_cantor ? render(st, sites)
                         : render_uniform_fft(st, cfg.grid_size);
      cloud.points.insert(cloud.points.end(), slice.begin(), slice.end());
    }
    cloud.provenance = "additive field on [" + fmt_g(cfg.t_lo) + ", " +
                       fmt_g(cfg.t_hi) + "] x " +
                       (cfg.use_cantor ? "Cantor sites" : "full grid") + ", " +
                       std::to_string(cfg.n_times) + " slices";
  } else {
    throw std::invalid_argument("image_dimension: unknown kind " + cfg.kind);
  }

  int j_min = cfg.j_min, j_max = cfg.j_max;
  bool explicit_window = j_min >= 0 && j_max >= 0;
  if (explicit_window) {
    if (j_max - j_min < 3) {
      throw std::invalid_argument(
          "image_dimension: explicit window must span >= 3 octaves");
    }
  } else {
    const std::pair<int, int> w = choose_window(cloud, cfg.j_cap);
    j_min = w.first;
    j_max = w.second;
  }
  out.estimate = dim_estimate(cloud, j_min, j_max);
  out.target = target;

  for (std::size_t i = 0; i < out.estimate.counts.size(); ++i) {
    res.table.push_back({static_cast<double>(j_min + static_cast<int>(i)),
                         static_cast<double>(out.estimate.counts[i])});
  }
  res.values = {{"slope", out.estimate.slope},
                {"ci_half_width", out.estimate.ci_half_width},
                {"j_min", static_cast<double>(j_min)},
                {"j_max", static_cast<double>(j_max)},
                {"target", target},
                {"n_points", static_cast<double>(cloud.size())}};
  res.notes.push_back(cloud.provenance);
  res.notes.push_back(explicit_window ? "estimate window fixed in the config"
                                      : "estimate window chosen from the data");
  if (p < hypothesis_floor) {
    res.notes.push_back(
        "outside theorem hypothesis: p = " + std::to_string(p) +
        " is below the floor p >= " + std::to_string(hypothesis_floor) +
        " for kind " + cfg.kind + "; the estimate is reported as-is");
  }
  // The ambient space caps any box-counting estimate at p, and the theory
  // caps it at the target; the cap check is always on.
  res.check_le("estimate-upper-bound", out.estimate.slope,
               std::min(target, static_cast<double>(p)) + cfg.upper_tol);
  if (!std::isnan(cfg.slope_lo) && !std::isnan(cfg.slope_hi)) {
    res.check_in("estimate-bracket", out.estimate.slope, cfg.slope_lo,
                 cfg.slope_hi);
  }
  return out;
}

// --- Lattice hit-count growth -------------------------------------------

namespace {

struct CellEntry {
  std::uint64_t key;
  std::uint32_t idx;
};

std::uint64_t cell_key_of(const double* nu, int p, double w, const long* off) {
  std::uint64_t key = 0;
  for (int c = 0; c < p; ++c) {
    const double q = std::floor(nu[c] / w);
    if (!(q > -16000.0 && q < 16000.0)) {
      throw ViolationFound(
          "counting: field value outside the packable cell range");
    }
    const long cell = static_cast<long>(q) + 16384 + (off ? off[c] : 0);
    key = (key << 16) | static_cast<std::uint64_t>(cell);
  }
  return key;
}

// Sites (by lattice index) whose value lies in the closed ball B(nu, r),
// found through the sorted cell index: a ball of radius r = w reaches only
// the 3^p cells adjacent to nu's cell.
long count_ball(const std::vector<CellEntry>& cells,
                const std::vector<float>& vals, int p, long stride, double w,
                double r, const double* nu) {
  const double r2 = r * r;
  long off[kMaxFieldDim];
  for (int c = 0; c < p; ++c) off[c] = -1;
  long count = 0;
  for (;;) {
    const std::uint64_t key = cell_key_of(nu, p, w, off);
    auto it = std::lower_bound(
        cells.begin(), cells.end(), key,
        [](const CellEntry& e, std::uint64_t k) { return e.key < k; });
    for (; it != cells.end() && it->key == key; ++it) {
      const float* v =
          &vals[static_cast<std::size_t>(it->idx) *
                static_cast<std::size_t>(stride) * static_cast<std::size_t>(p)];
      double d2 = 0.0;
      for (int c = 0; c < p; ++c) {
        const double d = static_cast<double>(v[c]) - nu[c];
        d2 += d * d;
      }
      if (d2 <= r2) ++count;
    }
    int c = 0;
    while (c < p && off[c] == 1) {
      off[c] = -1;
      ++c;
    }
    if (c == p) break;
    ++off[c];
  }
  return count;
}

}  // namespace

ExperimentResult counting_growth_experiment(const CountingGrowthConfig& cfg) {
  const int p = cfg.p;
  if (p < 1 || p > 4) {
    throw std::invalid_argument(
        "counting_growth: cell keys pack 16 bits per coordinate, need p <= 4");
  }
  if (!(cfg.delta > 0.0) || !(cfg.alpha > 0.0) || cfg.n_lo < 1 ||
      cfg.n_hi < cfg.n_lo || cfg.times.empty() || cfg.n_centers < 1) {
    throw std::invalid_argument("counting_growth: bad configuration");
  }
  ExperimentResult res;
  res.experiment = "counts";
  res.table_header = {"t",     "n",           "lattice_size", "max_count",
                      "bound", "argmax_mesh", "recount_match"};

  // Lattice exponents: level n has spacing 2^{-m_n}, m_n = n (1+delta)/alpha,
  // which must be integral for the dyadic grids to nest.
  std::vector<int> m_of_n(static_cast<std::size_t>(cfg.n_hi) + 1, 0);
  for (int n = cfg.n_lo; n <= cfg.n_hi; ++n) {
    const double e = static_cast<double>(n) * (1.0 + cfg.delta) / cfg.alpha;
    const long m = std::llround(e);
    if (std::fabs(e - static_cast<double>(m)) > 1e-9) {
      throw std::invalid_argument(
          "counting_growth: n (1 + delta) / alpha must be an integer at every "
          "level (got " +
          fmt_g(e) + " at n = " + std::to_string(n) + ")");
    }
    if (m + 1 > 26) {
      throw CapExceeded("counting_growth: lattice 2^" + std::to_string(m + 1) +
                        " exceeds the 2^26 site cap");
    }
    m_of_n[static_cast<std::size_t>(n)] = static_cast<int>(m);
    // Validity gate: the asserted bound 2^{2 n p delta} must dominate the
    // lattice size, otherwise the check could fail for trivial counting
    // reasons and says nothing about the field.
    if (2.0 * n * p * cfg.delta <
        static_cast<double>(m + 1) - 1e-9) {
      throw std::invalid_argument(
          "counting_growth: bound 2^{2npd} smaller than the level-" +
          std::to_string(n) + " lattice; configuration cannot be informative");
    }
  }
  const int m_hi = m_of_n[static_cast<std::size_t>(cfg.n_hi)];
  const long J_hi = 1L << (m_hi + 1);
  if (2L * cfg.n_modes + 2 > J_hi) {
    throw std::invalid_argument(
        "counting_growth: need 2 n_modes + 2 <= finest lattice size");
  }

  SpectralState st = make_state(p, cfg.n_modes, cfg.seed, cfg.replica);
  std::vector<float> vals(static_cast<std::size_t>(J_hi) *
                          static_cast<std::size_t>(p));
  std::vector<double> dbuf(static_cast<std::size_t>(J_hi));
  std::vector<CellEntry> cells;
  cells.reserve(static_cast<std::size_t>(J_hi));

  double prev_t = 0.0;
  double max_ratio = 0.0;
  bool recount_ok = true;
  std::vector<double> nu(static_cast<std::size_t>(p));
  std::vector<double> best_nu(static_cast<std::size_t>(p));
  for (double t : cfg.times) {
    if (!(t > prev_t)) {
      throw std::invalid_argument(
          "counting_growth: times must be positive and strictly increasing");
    }
    evolve(st, t - prev_t);
    prev_t = t;
    for (int c = 0; c < p; ++c) {
      render_uniform_fft_coord(st, c, static_cast<int>(J_hi), dbuf.data());
      for (long j = 0; j < J_hi; ++j) {
        vals[static_cast<std::size_t>(j) * static_cast<std::size_t>(p) +
             static_cast<std::size_t>(c)] =
            static_cast<float>(dbuf[static_cast<std::size_t>(j)]);
      }
    }
    for (int n = cfg.n_lo; n <= cfg.n_hi; ++n) {
      const int m = m_of_n[static_cast<std::size_t>(n)];
      const long J_n = 1L << (m + 1);
      const long stride = J_hi / J_n;
      const double r = std::ldexp(1.0, -n);
      const double w = r;  // one cell per ball radius: 3^p neighbours suffice
      const double bound = std::pow(2.0, 2.0 * n * p * cfg.delta);

      cells.clear();
      for (long s = 0; s < J_n; ++s) {
        const float* v = &vals[static_cast<std::size_t>(s * stride) *
                               static_cast<std::size_t>(p)];
        double tmp[kMaxFieldDim];
        for (int c = 0; c < p; ++c) tmp[c] = static_cast<double>(v[c]);
        cells.push_back({cell_key_of(tmp, p, w, nullptr),
                         static_cast<std::uint32_t>(s)});
      }
      std::sort(cells.begin(), cells.end(),
                [](const CellEntry& a, const CellEntry& b) {
                  return a.key < b.key || (a.key == b.key && a.idx < b.idx);
                });

      // Adversarial centers: observed values (a ball centered on a value
      // always counts at least that site) and the same values snapped to
      // the 2^{-2n}/sqrt(p) mesh that discretizes all possible centers.
      const double w_mesh = std::ldexp(1.0, -2 * n) / std::sqrt(
                                static_cast<double>(p));
      const long cstride =
          std::max(1L, J_n / static_cast<long>(cfg.n_centers));
      long best = 0;
      int best_mesh = 0;
      for (long site = 0; site < J_n; site += cstride) {
        const float* v = &vals[static_cast<std::size_t>(site * stride) *
                               static_cast<std::size_t>(p)];
        for (int variant = 0; variant < 2; ++variant) {
          for (int c = 0; c < p; ++c) {
            const double x = static_cast<double>(v[c]);
            nu[static_cast<std::size_t>(c)] =
                variant == 0 ? x : std::round(x / w_mesh) * w_mesh;
          }
          const long cnt = count_ball(cells, vals, p, stride, w, r, nu.data());
          if (cnt > best) {
            best = cnt;
            best_mesh = variant;
            best_nu = nu;
          }
        }
      }
      max_ratio = std::max(max_ratio, static_cast<double>(best) / bound);

      double recount_match = -1.0;
      if (n <= cfg.cross_check_n_max && best > 0) {
        FieldSample fs;
        fs.times = {t};
        fs.sites = spatial_lattice(n, cfg.delta, cfg.alpha);
        fs.p = p;
        fs.n_modes = cfg.n_modes;
        fs.seed = cfg.seed;
        if (static_cast<long>(fs.sites.size()) != J_n) {
          throw std::logic_error("counting_growth: lattice size mismatch");
        }
        fs.values.resize(static_cast<std::size_t>(J_n) *
                         static_cast<std::size_t>(p));
        for (long s = 0; s < J_n; ++s) {
          for (int c = 0; c < p; ++c) {
            fs.values[static_cast<std::size_t>(s) *
                          static_cast<std::size_t>(p) +
                      static_cast<std::size_t>(c)] = static_cast<double>(
                vals[static_cast<std::size_t>(s * stride) *
                         static_cast<std::size_t>(p) +
                     static_cast<std::size_t>(c)]);
          }
        }
        const long cross =
            count_lattice_hits(fs, n, cfg.delta, best_nu, r, cfg.alpha);
        recount_match = cross == best ? 1.0 : 0.0;
        recount_ok = recount_ok && cross == best;
      }
      res.table.push_back({t, static_cast<double>(n),
                           static_cast<double>(J_n), static_cast<double>(best),
                           bound, static_cast<double>(best_mesh),
                           recount_match});
    }
  }
  res.values = {{"max_count_to_bound_ratio", max_ratio}};
  res.notes.push_back(
      "with these parameters the bound exceeds every lattice size "
      "(2 n p delta >= m_n + 1), so the growth inequality holds structurally; "
      "the informative output is the measured count profile");
  res.check_le("count-within-bound", max_ratio, 1.0);
  res.check_true("independent-recount-agrees", recount_ok,
                 recount_ok ? 1.0 : 0.0,
                 "cell-index counts equal the direct lattice recount at "
                 "every cross-checked level");
  return res;
}

// --- Structural property suites ---------------------------------------------

namespace {

PointCloud embed_cloud(const std::vector<double>& xs, int dim) {
  PointCloud c;
  c.dim = dim;
  c.points.reserve(xs.size() * static_cast<std::size_t>(dim));
  for (double x : xs) {
    c.points.push_back(x);
    for (int i = 1; i < dim; ++i) c.points.push_back(0.0);
  }
  return c;
}

}  // namespace

ExperimentResult structural_experiment(const StructuralConfig& cfg) {
  ExperimentResult res;
  res.experiment = "structural";
  NormalStream rng(derive_stream(cfg.seed, {9001}));

  // 1. Torus metric axioms, plus the triangle inequality of the parabolic
  // metric (both exponents are subadditive).
  {
    double max_asym = 0.0, max_tri = 0.0, max_para_tri = 0.0;
    double max_dist = 0.0;
    bool identity_ok = true;
    for (int i = 0; i < cfg.n_random; ++i) {
      const double a = -3.0 + 6.0 * rng.uniform01();
      const double b = -3.0 + 6.0 * rng.uniform01();
      const double c = -3.0 + 6.0 * rng.uniform01();
      const double dab = torus_dist(a, b);
      const double dba = torus_dist(b, a);
      const double dac = torus_dist(a, c);
      const double dbc = torus_dist(b, c);
      max_asym = std::max(max_asym, std::fabs(dab - dba));
      max_tri = std::max(max_tri, dac - (dab + dbc));
      max_dist = std::max(max_dist, dab);
      identity_ok = identity_ok && torus_dist(a, a) == 0.0 &&
                    torus_dist(a, a + 2.0) < 1e-12;
      const SpaceTimePoint P{0.1 + rng.uniform01(), a};
      const SpaceTimePoint Q{0.1 + rng.uniform01(), b};
      const SpaceTimePoint R{0.1 + rng.uniform01(), c};
      max_para_tri =
          std::max(max_para_tri, parabolic_dist(P, R) -
                                     (parabolic_dist(P, Q) +
                                      parabolic_dist(Q, R)));
    }
    res.check_le("metric-symmetry", max_asym, 0.0);
    res.check_le("metric-triangle", max_tri, 1e-12);
    res.check_le("metric-range", max_dist, 1.0);
    res.check_true("metric-identity", identity_ok, identity_ok ? 1.0 : 0.0,
                   "dist(a, a) == 0 and dist(a, a + 2) < 1e-12");
    res.check_le("parabolic-triangle", max_para_tri, 1e-12);
  }

  // 2. Greedy ordering: each point's predecessor is its nearest earlier
  // neighbour, verified against the declared property over random sets.
  {
    bool ok = true;
    for (int s = 0; s < 64 && ok; ++s) {
      const int m = 2 + static_cast<int>(rng.uniform01() * 9.0);
      std::vector<SpaceTimePoint> pts;
      for (int i = 0; i < m; ++i) {
        pts.push_back({0.05 + rng.uniform01(), -1.0 + 2.0 * rng.uniform01()});
      }
      const std::vector<std::size_t> order = greedy_order(pts);
      std::vector<bool> seen(pts.size(), false);
      for (std::size_t idx : order) {
        if (idx >= pts.size() || seen[idx]) ok = false;
        if (!ok) break;
        seen[idx] = true;
      }
      for (std::size_t i = 2; ok && i < order.size(); ++i) {
        const double d_pred =
            parabolic_dist(pts[order[i]], pts[order[i - 1]]);
        for (std::size_t j = 0; j + 1 < i; ++j) {
          if (parabolic_dist(pts[order[i]], pts[order[j]]) <
              d_pred - 1e-15) {
            ok = false;
            break;
          }
        }
      }
    }
    res.check_true("greedy-order-verified", ok, ok ? 1.0 : 0.0,
                   "permutation valid and each predecessor nearest among "
                   "earlier points on 64 random sets");
  }

  // 3. Covariance Grams are positive semidefinite (closed form and the
  // truncated law).
  {
    double worst = 0.0;  // most negative eigenvalue relative to trace
    for (int s = 0; s < 64; ++s) {
      const int m = 2 + static_cast<int>(rng.uniform01() * 9.0);
      std::vector<SpaceTimePoint> pts;
      for (int i = 0; i < m; ++i) {
        pts.push_back({0.05 + 0.95 * rng.uniform01(),
                       -1.0 + 2.0 * rng.uniform01()});
      }
      for (int trunc = 0; trunc < 2; ++trunc) {
        Eigen::MatrixXd G(m, m);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < m; ++j) {
            const SpaceTimePoint& a = pts[static_cast<std::size_t>(i)];
            const SpaceTimePoint& b = pts[static_cast<std::size_t>(j)];
            G(i, j) = trunc == 0
                          ? covariance_of_H(a.t, a.x, b.t, b.x)
                          : covariance_of_H_truncated(a.t, a.x, b.t, b.x, 256);
          }
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            (G + G.transpose()) / 2.0);
        const double lam_min = es.eigenvalues().minCoeff();
        worst = std::max(worst, -lam_min / G.trace());
      }
    }
    res.check_le("covariance-gram-psd", worst, 1e-10);
  }

  // 4. sqrt(smallest eigenvalue of sigma^T sigma) inherits the sharp
  // Lipschitz constant of (1 + a sin v_1) I, and is constant for constant
  // sigma. The library check throws on violation.
  {
    bool ok = true;
    double measured = 0.0;
    std::string detail =
        "max quotient within the declared constants for sin_diag and constant";
    try {
      const Coefficients amp = make_coefficients("zero", "sin_diag", 3, 0.5);
      const SqrtLambdaReport r1 = sqrt_lambda_lipschitz_check(
          amp.diffusion, 3, 0.5, cfg.n_random, derive_stream(cfg.seed, {9107}));
      measured = r1.max_quotient;
      const Coefficients con = make_coefficients("zero", "constant", 2, 0.7);
      sqrt_lambda_lipschitz_check(con.diffusion, 2, 0.0, cfg.n_random,
                                  derive_stream(cfg.seed, {9108}));
    } catch (const ViolationFound& e) {
      ok = false;
      detail = e.what();
    }
    res.check_true("sqrt-lambda-lipschitz", ok, measured, detail);
  }

  // 5. The probed distance field d_r is 1-Lipschitz (up to bisection
  // slack). diag(v_1, 1) degenerates on |v_1| < sqrt(r), and the nearest
  // boundary point lies along an axis, where the probe is exact.
  {
    const Coefficients dg = make_coefficients("zero", "diag_v1", 2);
    const RegularizedDiffusion reg =
        regularize_sigma(dg.diffusion, 2, 0.01, 4.0);
    const DrLipschitzReport rep = d_r_lipschitz_check(
        reg, 2, 2.0, cfg.n_random, derive_stream(cfg.seed, {9109}));
    res.check_le("distance-field-lipschitz", rep.max_quotient, 1.001);
    res.check_true("distance-field-sampled-inside",
                   rep.n_pairs_inside > 0,
                   static_cast<double>(rep.n_pairs_inside),
                   "some sampled pairs touched the degeneracy set");
  }

  // 6. Radial drift truncation keeps the Lipschitz constant and yields the
  // exact sup on the ball for a radially monotone drift.
  {
    const Coefficients sat = make_coefficients("saturating", "identity", 3);
    const Coefficients trunc = truncate_drift(sat, 2.0);
    const LipschitzReport rep = validate_lipschitz(
        trunc, cfg.n_random, derive_stream(cfg.seed, {9110}));
    res.check_true("truncation-keeps-lipschitz", rep.ok,
                   rep.max_drift_quotient,
                   "sampled quotients within the declared constants");
    res.check_in("truncated-drift-sup", trunc.drift_sup, 2.0 / 3.0 - 1e-9,
                 2.0 / 3.0 + 1e-9);
    const Coefficients lin = make_coefficients("linear_decay", "identity", 2);
    const Coefficients lin_trunc = truncate_drift(lin, 2.0);
    const LipschitzReport rep2 = validate_lipschitz(
        lin_trunc, cfg.n_random, derive_stream(cfg.seed, {9111}));
    res.check_true("truncation-keeps-lipschitz-linear", rep2.ok,
                   rep2.max_drift_quotient,
                   "sampled quotients within the declared constants");
  }

  // 7. Even-moment bounds for the stochastic convolution.
  {
    const BdgReport rep =
        bdg_bound_check(2, 0.5, 0.25, static_cast<int>(cfg.bdg_replicas), 256,
                        {2, 4, 8}, derive_stream(cfg.seed, {9112}));
    bool ok = true;
    double worst = 0.0;
    for (const BdgReport::Row& row : rep.rows) {
      ok = ok && row.ok;
      worst = std::max(worst, row.empirical / row.bound);
    }
    res.check_true("even-moment-bounds", ok, worst,
                   "empirical k-th moments below the closed-form bound at "
                   "k = 2, 4, 8");
  }

  // 8. Hoelder image upper bound on three maps with known exponents:
  // identity, isometric embedding, and the globally 1/2-Hoelder sqrt.
  {
    CantorSpec spec{12, 1.0 / 3.0, 0.1, 1.0};
    const std::vector<double> xs = cantor_points(spec);
    PointCloud src;
    src.dim = 1;
    src.points = xs;
    PointCloud same = src;
    const ImageUpperReport ident =
        lipschitz_image_upper_check(src, same, 1.0, 3, 8);
    const PointCloud planar = embed_cloud(xs, 2);
    const ImageUpperReport embed =
        lipschitz_image_upper_check(src, planar, 1.0, 3, 8);
    PointCloud roots;
    roots.dim = 1;
    roots.points.reserve(xs.size());
    for (double x : xs) roots.points.push_back(std::sqrt(x));
    const ImageUpperReport holder =
        lipschitz_image_upper_check(src, roots, 0.5, 3, 8);
    const bool ok = ident.ok && embed.ok && holder.ok;
    res.check_true("image-dimension-bounds", ok,
                   std::max({ident.image.slope - ident.bound,
                             embed.image.slope - embed.bound,
                             holder.image.slope - holder.bound}),
                   "image estimates below slope/alpha bounds for identity, "
                   "embedding, and sqrt");
  }

  return res;
}

// --- Raw output drivers --------------------------------------------------

ExperimentResult sample_field_experiment(const SampleFieldConfig& cfg) {
  if (cfg.p < 1 || cfg.p > kMaxFieldDim || cfg.n_sites < 1 ||
      cfg.times.empty()) {
    throw std::invalid_argument("sample_field: bad configuration");
  }
  ExperimentResult res;
  res.experiment = "sample-h";
  std::vector<double> times = cfg.times;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<double> sites(static_cast<std::size_t>(cfg.n_sites));
  for (int j = 0; j < cfg.n_sites; ++j) {
    sites[static_cast<std::size_t>(j)] =
        -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(cfg.n_sites);
  }
  const FieldSample fs =
      sample_grid(times, sites, cfg.p, cfg.n_modes, cfg.seed);
  res.table_header = {"t", "x"};
  for (int i = 0; i < cfg.p; ++i) {
    res.table_header.push_back("H_" + std::to_string(i + 1));
  }
  double sup = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t j = 0; j < sites.size(); ++j) {
      std::vector<double> row = {times[k], sites[j]};
      for (int i = 0; i < cfg.p; ++i) {
        const double v =
            fs.values[(k * sites.size() + j) * static_cast<std::size_t>(cfg.p) +
                      static_cast<std::size_t>(i)];
        row.push_back(v);
        sup = std::max(sup, std::fabs(v));
      }
      res.table.push_back(std::move(row));
    }
  }
  res.values = {{"sup_abs", sup},
                {"n_rows", static_cast<double>(res.table.size())}};
  return res;
}

ExperimentResult solve_run_experiment(const SolveRunConfig& cfg) {
  ExperimentResult res;
  res.experiment = "solve";
  SolverConfig sc;
  sc.p = cfg.p;
  sc.n_sites = cfg.grid_size;
  sc.dt = cfg.dt;
  sc.t_end = cfg.t_end;
  sc.seed = cfg.seed;
  sc.replica = cfg.replica;
  sc.initial_data = make_initial(cfg.initial, cfg.p, cfg.initial_a,
                                 cfg.initial_b);
  if (cfg.snapshot_times.empty()) {
    for (int k = 1; k <= 5; ++k) {
      sc.snapshot_times.push_back(cfg.t_end * static_cast<double>(k) / 5.0);
    }
  } else {
    sc.snapshot_times = cfg.snapshot_times;
  }
  const Coefficients coeffs =
      make_coefficients(cfg.drift, cfg.diffusion, cfg.p, cfg.diffusion_param);
  const Trajectory tr = solve(sc, coeffs);
  res.table_header = {"t", "x"};
  for (int i = 0; i < cfg.p; ++i) {
    res.table_header.push_back("u_" + std::to_string(i + 1));
  }
  const std::size_t J = tr.sample.sites.size();
  for (std::size_t k = 0; k < tr.sample.times.size(); ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      std::vector<double> row = {tr.sample.times[k], tr.sample.sites[j]};
      for (int i = 0; i < cfg.p; ++i) {
        row.push_back(
            tr.sample.values[(k * J + j) * static_cast<std::size_t>(cfg.p) +
                             static_cast<std::size_t>(i)]);
      }
      res.table.push_back(std::move(row));
    }
  }
  res.values = {{"final_sup_norm", tr.sup_norm.back()},
                {"n_steps", static_cast<double>(tr.n_steps)}};
  res.check_true("solution-finite", !tr.blew_up,
                 tr.blew_up ? static_cast<double>(tr.blow_up_step) : 0.0,
                 tr.blew_up ? "non-finite value during the run"
                            : "every recorded value finite");
  return res;
}

}  // namespace torusheat
