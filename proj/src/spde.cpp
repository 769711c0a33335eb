#include "torusheat/spde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "torusheat/errors.hpp"
#include "torusheat/fft.hpp"
#include "torusheat/heat_kernel.hpp"
#include "torusheat/linreg.hpp"
#include "torusheat/rng.hpp"
#include "torusheat/torus.hpp"

namespace torusheat {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Stream tags 1 and 2 are shared with the exact spectral sampler: identical
// (seed, replica, coordinate, step) keys draw identical normals, which is
// what lets a solver run and a sampler run see the same Brownian modes.
constexpr std::uint64_t kTagCosine = 1;
constexpr std::uint64_t kTagSine = 2;
constexpr std::uint64_t kTagProbe = 11;     // sup-norm probe of truncated drifts
constexpr std::uint64_t kTagAudit = 12;     // Lipschitz difference quotients
constexpr std::uint64_t kTagLevelSet = 13;  // degeneracy-set probes and grids

long steps_for(const SolverConfig& cfg) {
  const long m = std::llround(cfg.t_end / cfg.dt);
  if (m < 1 || std::fabs(static_cast<double>(m) * cfg.dt - cfg.t_end) >
                   1e-9 * std::max(1.0, cfg.t_end)) {
    throw std::invalid_argument(
        "solve: t_end must be a positive whole number of steps");
  }
  return m;
}

void check_config(const SolverConfig& cfg, const Coefficients& co) {
  if (cfg.p < 1 || cfg.p > kMaxFieldDim) {
    throw std::invalid_argument("solve: need 1 <= p <= kMaxFieldDim");
  }
  if (co.p != cfg.p) {
    throw std::invalid_argument("solve: coefficient dimension != config.p");
  }
  if (cfg.n_sites < 4 || cfg.n_sites % 2 != 0) {
    throw std::invalid_argument("solve: n_sites must be even and >= 4");
  }
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("solve: need dt > 0");
  if (cfg.scheme != "semi-implicit-spectral") {
    throw std::invalid_argument("solve: unknown scheme '" + cfg.scheme + "'");
  }
  if (cfg.n_modes < 0 || cfg.n_modes > cfg.n_sites / 2) {
    throw std::invalid_argument("solve: n_modes must lie in [0, n_sites/2]");
  }
  if (cfg.snapshot_stride < 0) {
    throw std::invalid_argument("solve: snapshot_stride must be >= 0");
  }
}

long snap_to_step(double t, double dt, long n_steps) {
  long m = std::llround(t / dt);
  if (m < 0) m = 0;
  if (m > n_steps) m = n_steps;
  return m;
}

double norm2(const double* v, int p) {
  double q = 0.0;
  for (int i = 0; i < p; ++i) q += v[i] * v[i];
  return std::sqrt(q);
}

// Uniform draw from the ball ||v|| <= radius (normal direction, radial
// density matched to the volume element).
void ball_point(NormalStream& g, int p, double radius, double* v) {
  double q = 0.0;
  for (int i = 0; i < p; ++i) {
    v[i] = g();
    q += v[i] * v[i];
  }
  const double r = std::sqrt(q);
  const double rho =
      radius * std::pow(g.uniform01(), 1.0 / static_cast<double>(p));
  const double s = r > 0.0 ? rho / r : 0.0;
  for (int i = 0; i < p; ++i) v[i] *= s;
}

}  // namespace

std::vector<double> solver_grid(int n_sites) {
  if (n_sites < 4 || n_sites % 2 != 0) {
    throw std::invalid_argument("solver_grid: n_sites must be even and >= 4");
  }
  std::vector<double> x(n_sites);
  for (int j = 0; j < n_sites; ++j) {
    x[j] = -1.0 + 2.0 * static_cast<double>(j) / n_sites;
  }
  return x;
}

double grid_field_variance(double t, int n_sites) {
  if (n_sites < 4 || n_sites % 2 != 0) {
    throw std::invalid_argument(
        "grid_field_variance: n_sites must be even and >= 4");
  }
  const int nq = n_sites / 2;
  const double a = 2.0 * kPi * kPi * static_cast<double>(nq) * nq;
  // Modes 1..J/2-1 at full weight, the Nyquist mode at half weight (its
  // grid basis function carries a 1/sqrt(2) normalization).
  return variance_of_H_truncated(t, nq - 1) + 0.5 * (-std::expm1(-a * t)) / a;
}

Trajectory solve(const SolverConfig& cfg, const Coefficients& co) {
  check_config(cfg, co);
  const int p = cfg.p;
  const int J = cfg.n_sites;
  const int nq = J / 2;
  const double dt = cfg.dt;
  const long n_steps = steps_for(cfg);
  const int nc = cfg.n_modes == 0 ? nq : cfg.n_modes;  // cosine noise modes
  const int ns = std::min(nc, nq - 1);                 // sine noise modes
  const bool full_noise = (nc == nq);
  const int shift = ((cfg.noise_grid_shift % J) + J) % J;
  const bool has_b = static_cast<bool>(co.drift);
  const bool has_s = static_cast<bool>(co.diffusion);
  const bool track_lam = cfg.track_lambda && has_s;

  // Snapshot plan: requested times snapped to steps, stride multiples, and
  // always the final step.
  std::vector<long> snaps;
  for (double t : cfg.snapshot_times) snaps.push_back(snap_to_step(t, dt, n_steps));
  if (cfg.snapshot_stride > 0) {
    for (long m = 0; m <= n_steps; m += cfg.snapshot_stride) snaps.push_back(m);
  }
  snaps.push_back(n_steps);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

  Trajectory out;
  out.dt = dt;
  out.n_steps = n_steps;
  out.sample.p = p;
  out.sample.n_modes = nc;
  out.sample.seed = cfg.seed;
  out.sample.sites = solver_grid(J);
  out.sample.times.reserve(snaps.size());
  out.sample.values.assign(snaps.size() * static_cast<std::size_t>(J) * p, 0.0);
  out.sup_norm.reserve(n_steps + 1);
  if (track_lam) out.min_lambda.reserve(n_steps + 1);

  // Exact heat multiplier on Fourier index k, with the inverse transform's
  // 1/J normalization folded in.
  std::vector<double> dmul(nq + 1);
  for (int k = 0; k <= nq; ++k) {
    dmul[k] = std::exp(-kPi * kPi * static_cast<double>(k) * k * dt) / J;
  }
  // Exact per-mode standard deviation of the stochastic convolution
  // increment int_0^dt e^{(dt-s) Laplacian} dW: the same Ornstein-Uhlenbeck
  // transition noise the spectral sampler uses.
  std::vector<double> sig(nq + 1);
  sig[0] = std::sqrt(dt);
  for (int k = 1; k <= nq; ++k) {
    const double a = kPi * kPi * static_cast<double>(k) * k;
    sig[k] = std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
  }

  std::vector<std::vector<double>> u(p, std::vector<double>(J, 0.0));
  if (cfg.initial_data) {
    std::array<double, kMaxFieldDim> v{};
    for (int j = 0; j < J; ++j) {
      cfg.initial_data(out.sample.sites[j], v.data());
      for (int i = 0; i < p; ++i) u[i][j] = v[i];
    }
  }

  RealFft fft(J);
  std::vector<std::complex<double>> spec(nq + 1);
  std::vector<double> raw(J);
  std::vector<std::vector<double>> dw(has_s ? p : 0, std::vector<double>(J));
  std::vector<std::vector<double>> w(p, std::vector<double>(J));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double nyq_sign = (nq % 2 == 0) ? 1.0 : -1.0;

  std::size_t snap_pos = 0;
  std::size_t recorded = 0;

  // Per-step bookkeeping; returns false on a non-finite value (blow-up).
  auto diagnostics = [&](long m) -> bool {
    double smax = -1.0;
    bool finite = true;
    for (int j = 0; j < J && finite; ++j) {
      double q = 0.0;
      for (int i = 0; i < p; ++i) q += u[i][j] * u[i][j];
      if (!std::isfinite(q)) {
        finite = false;
      } else if (q > smax) {
        smax = q;
      }
    }
    const double sup =
        finite ? std::sqrt(smax) : std::numeric_limits<double>::quiet_NaN();
    out.sup_norm.push_back(sup);
    if (!finite) {
      out.blew_up = true;
      out.blow_up_step = m;
      return false;
    }
    if (cfg.stop_norm_threshold > 0.0 && out.first_norm_hit < 0 &&
        sup >= cfg.stop_norm_threshold) {
      out.first_norm_hit = m;
    }
    if (track_lam) {
      double lmin = std::numeric_limits<double>::infinity();
      std::array<double, kMaxFieldDim> v{};
      for (int j = 0; j < J; ++j) {
        for (int i = 0; i < p; ++i) v[i] = u[i][j];
        lmin = std::min(lmin, smallest_singular_value(co.diffusion, v.data(), p));
      }
      out.min_lambda.push_back(lmin);
      if (cfg.stop_lambda_threshold >= 0.0 && out.first_lambda_hit < 0 &&
          lmin <= cfg.stop_lambda_threshold) {
        out.first_lambda_hit = m;
      }
    }
    return true;
  };
  auto maybe_snapshot = [&](long m) {
    if (snap_pos < snaps.size() && snaps[snap_pos] == m) {
      out.sample.times.push_back(static_cast<double>(m) * dt);
      double* dst = out.sample.values.data() +
                    recorded * static_cast<std::size_t>(J) * p;
      for (int j = 0; j < J; ++j) {
        for (int i = 0; i < p; ++i) dst[static_cast<std::size_t>(j) * p + i] = u[i][j];
      }
      ++recorded;
      ++snap_pos;
    }
  };

  if (diagnostics(0)) maybe_snapshot(0);

  for (long m = 1; m <= n_steps && !out.blew_up; ++m) {
    if (has_s) {
      // Synthesize the convolution increment Xi for each coordinate from
      // independent N(0, sig_n^2) mode amplitudes on the orthonormal grid
      // basis; the white-in-space increment would use sqrt(dt) instead and
      // lose every stiff mode to the heat multiplier.
      for (int i = 0; i < p; ++i) {
        NormalStream cos_noise(derive_stream(
            cfg.seed, {kTagCosine, cfg.replica, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(m)}));
        std::fill(spec.begin(), spec.end(), std::complex<double>(0.0, 0.0));
        for (int n = 0; n <= nc; ++n) {
          const double z = cos_noise();
          if (n == 0) {
            spec[0] = {sig[0] * z * inv_sqrt2, 0.0};
          } else if (n < nq) {
            spec[n] = {(n % 2 ? -0.5 : 0.5) * sig[n] * z, 0.0};
          } else if (full_noise) {
            spec[nq] = {nyq_sign * inv_sqrt2 * sig[nq] * z, 0.0};
          }
        }
        NormalStream sin_noise(derive_stream(
            cfg.seed, {kTagSine, cfg.replica, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(m)}));
        for (int n = 1; n <= ns; ++n) {
          const double z = sin_noise();
          // 2 Re(spec e^{i theta}) = c cos(theta) + s sin(theta) when
          // spec = (c - i s) / 2; the (-1)^n folds the grid phase.
          spec[n].imag((n % 2 ? 0.5 : -0.5) * sig[n] * z);
        }
        fft.inverse(spec.data(), raw.data());
        if (shift == 0) {
          std::memcpy(dw[i].data(), raw.data(), sizeof(double) * J);
        } else {
          for (int j = 0; j < J; ++j) {
            const int js = j + shift;
            dw[i][j] = raw[js < J ? js : js - J];
          }
        }
      }
    }

    if (!has_b && !has_s) {
      for (int i = 0; i < p; ++i) w[i] = u[i];
    } else {
      std::array<double, kMaxFieldDim> v{};
      std::array<double, kMaxFieldDim> bv{};
      std::array<double, kMaxFieldDim> sd{};
      std::array<double, kMaxFieldDim * kMaxFieldDim> mat{};
      for (int j = 0; j < J; ++j) {
        for (int i = 0; i < p; ++i) v[i] = u[i][j];
        if (has_b) co.drift(v.data(), bv.data());
        if (has_s) {
          // Freeze sigma at the step start and fold it into the increment
          // in place; the transformed noise is added after the semigroup.
          co.diffusion(v.data(), mat.data());
          for (int i = 0; i < p; ++i) {
            const double* row = mat.data() + static_cast<std::size_t>(i) * p;
            double s = 0.0;
            for (int l = 0; l < p; ++l) s += row[l] * dw[l][j];
            sd[i] = s;
          }
          for (int i = 0; i < p; ++i) dw[i][j] = sd[i];
        }
        for (int i = 0; i < p; ++i) {
          w[i][j] = has_b ? v[i] + dt * bv[i] : v[i];
        }
      }
    }

    for (int i = 0; i < p; ++i) {
      fft.forward(w[i].data(), spec.data());
      for (int k = 0; k <= nq; ++k) spec[k] *= dmul[k];
      fft.inverse(spec.data(), u[i].data());
      if (has_s) {
        double* ui = u[i].data();
        const double* di = dw[i].data();
        for (int j = 0; j < J; ++j) ui[j] += di[j];
      }
    }

    if (diagnostics(m)) maybe_snapshot(m);
  }

  out.sample.values.resize(recorded * static_cast<std::size_t>(J) * p);
  return out;
}

std::vector<Trajectory> solve_ensemble(const SolverConfig& cfg,
                                       const Coefficients& co, int n_replicas,
                                       exec policy) {
  if (n_replicas < 1) {
    throw std::invalid_argument("solve_ensemble: need n_replicas >= 1");
  }
  std::vector<Trajectory> out(n_replicas);
  if (policy == exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < n_replicas; ++r) {
      SolverConfig c = cfg;
      c.replica = cfg.replica + static_cast<std::uint64_t>(r);
      out[r] = solve(c, co);
    }
  } else {
    for (int r = 0; r < n_replicas; ++r) {
      SolverConfig c = cfg;
      c.replica = cfg.replica + static_cast<std::uint64_t>(r);
      out[r] = solve(c, co);
    }
  }
  return out;
}

Coefficients truncate_drift(const Coefficients& coeffs, double N, int n_probe,
                            std::uint64_t seed) {
  if (!(N > 0.0)) throw std::invalid_argument("truncate_drift: need N > 0");
  if (coeffs.p < 1 || coeffs.p > kMaxFieldDim) {
    throw std::invalid_argument("truncate_drift: bad dimension");
  }
  Coefficients out = coeffs;
  out.drift_bounded = true;
  if (!coeffs.drift) {
    out.drift_sup = 0.0;
    return out;
  }
  const int p = coeffs.p;
  const DriftFn inner = coeffs.drift;
  out.drift = [inner, N, p](const double* v, double* b) {
    double q = 0.0;
    for (int i = 0; i < p; ++i) q += v[i] * v[i];
    if (q <= N * N) {
      inner(v, b);
      return;
    }
    std::array<double, kMaxFieldDim> scaled;
    const double s = N / std::sqrt(q);
    for (int i = 0; i < p; ++i) scaled[i] = s * v[i];
    inner(scaled.data(), b);
  };
  // Sampled sup norm over the ball ||v|| <= N. Half the samples sit exactly
  // on the boundary sphere, so radially monotone drifts are measured
  // exactly; in general this is a lower estimate of the true sup.
  NormalStream g(derive_stream(seed, {kTagProbe}));
  std::array<double, kMaxFieldDim> v{};
  std::array<double, kMaxFieldDim> b{};
  double sup = 0.0;
  for (int s = 0; s < n_probe; ++s) {
    double q = 0.0;
    for (int i = 0; i < p; ++i) {
      v[i] = g();
      q += v[i] * v[i];
    }
    const double r = std::sqrt(q);
    double rho = N;
    if (s % 2 == 1) {
      rho *= std::pow(g.uniform01(), 1.0 / static_cast<double>(p));
    }
    const double scale = r > 0.0 ? rho / r : 0.0;
    for (int i = 0; i < p; ++i) v[i] *= scale;
    out.drift(v.data(), b.data());
    sup = std::max(sup, norm2(b.data(), p));
  }
  out.drift_sup = sup;
  return out;
}

double smallest_singular_value(const DiffusionFn& sigma, const double* v,
                               int p) {
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("smallest_singular_value: bad dimension");
  }
  if (!sigma) return 0.0;
  std::array<double, kMaxFieldDim * kMaxFieldDim> buf{};
  sigma(v, buf.data());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      S(buf.data(), p, p);
  Eigen::MatrixXd gram = S.transpose() * S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram,
                                                    Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(0));
}

LipschitzReport validate_lipschitz(const Coefficients& coeffs, int n_pairs,
                                   std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("validate_lipschitz: n_pairs");
  const int p = coeffs.p;
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("validate_lipschitz: bad dimension");
  }
  NormalStream g(derive_stream(seed, {kTagAudit}));
  std::array<double, kMaxFieldDim> v{}, w{}, bv{}, bw{};
  std::array<double, kMaxFieldDim * kMaxFieldDim> sv{}, sw{};
  LipschitzReport rep;
  rep.n_pairs = n_pairs;
  for (int s = 0; s < n_pairs; ++s) {
    double dq = 0.0;
    for (int i = 0; i < p; ++i) {
      v[i] = 2.0 * g();
      w[i] = 2.0 * g();
      dq += (v[i] - w[i]) * (v[i] - w[i]);
    }
    const double dist = std::sqrt(dq);
    if (dist < 1e-12) continue;
    if (coeffs.drift) {
      coeffs.drift(v.data(), bv.data());
      coeffs.drift(w.data(), bw.data());
      double q = 0.0;
      for (int i = 0; i < p; ++i) q += (bv[i] - bw[i]) * (bv[i] - bw[i]);
      rep.max_drift_quotient =
          std::max(rep.max_drift_quotient, std::sqrt(q) / dist);
    }
    if (coeffs.diffusion) {
      coeffs.diffusion(v.data(), sv.data());
      coeffs.diffusion(w.data(), sw.data());
      double q = 0.0;
      for (int i = 0; i < p * p; ++i) q += (sv[i] - sw[i]) * (sv[i] - sw[i]);
      rep.max_diffusion_quotient =
          std::max(rep.max_diffusion_quotient, std::sqrt(q) / dist);
    }
  }
  rep.ok = rep.max_drift_quotient <= coeffs.lip_drift * 1.01 + 1e-12 &&
           rep.max_diffusion_quotient <= coeffs.lip_diffusion * 1.01 + 1e-12;
  return rep;
}

SqrtLambdaReport sqrt_lambda_lipschitz_check(const DiffusionFn& sigma, int p,
                                             double lip_declared, int n_pairs,
                                             std::uint64_t seed) {
  if (n_pairs < 1) {
    throw std::invalid_argument("sqrt_lambda_lipschitz_check: n_pairs");
  }
  NormalStream g(derive_stream(seed, {kTagAudit, 2}));
  std::array<double, kMaxFieldDim> v{}, w{};
  SqrtLambdaReport rep;
  rep.lip_declared = lip_declared;
  rep.n_pairs = n_pairs;
  for (int s = 0; s < n_pairs; ++s) {
    double dq = 0.0;
    for (int i = 0; i < p; ++i) {
      v[i] = 2.0 * g();
      w[i] = 2.0 * g();
      dq += (v[i] - w[i]) * (v[i] - w[i]);
    }
    const double dist = std::sqrt(dq);
    if (dist < 1e-12) continue;
    const double a = std::sqrt(smallest_singular_value(sigma, v.data(), p));
    const double b = std::sqrt(smallest_singular_value(sigma, w.data(), p));
    rep.max_quotient = std::max(rep.max_quotient, std::fabs(a - b) / dist);
  }
  if (rep.max_quotient > lip_declared * (1.0 + 1e-6) + 1e-12) {
    throw ViolationFound(
        "sqrt(lambda) difference quotient " + std::to_string(rep.max_quotient) +
        " exceeds the declared Lipschitz constant " +
        std::to_string(lip_declared));
  }
  return rep;
}

RegularizedDiffusion regularize_sigma(const DiffusionFn& sigma, int p, double r,
                                      double N, const ProbeConfig& probe) {
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("regularize_sigma: bad dimension");
  }
  if (!(r > 0.0) || !(N > 0.0)) {
    throw std::invalid_argument("regularize_sigma: need r > 0 and N > 0");
  }
  auto lambda = [sigma, p](const double* v) {
    return smallest_singular_value(sigma, v, p);
  };

  // Probe directions: the 2p coordinate axes first (exact for axis-aligned
  // level sets), then random unit vectors.
  std::vector<std::vector<double>> dirs;
  for (int i = 0; i < p; ++i) {
    for (double s : {1.0, -1.0}) {
      std::vector<double> d(p, 0.0);
      d[i] = s;
      dirs.push_back(d);
    }
  }
  NormalStream dg(derive_stream(probe.seed, {kTagLevelSet, 1}));
  while (static_cast<int>(dirs.size()) < std::max(probe.n_directions, 2 * p)) {
    std::vector<double> d(p);
    double q = 0.0;
    for (int i = 0; i < p; ++i) {
      d[i] = dg();
      q += d[i] * d[i];
    }
    if (q < 1e-12) continue;
    const double s = 1.0 / std::sqrt(q);
    for (int i = 0; i < p; ++i) d[i] *= s;
    dirs.push_back(std::move(d));
  }

  const double tol = probe.tol;
  const double max_radius = probe.max_radius;
  const int n_march = probe.n_march;
  auto d_r = [lambda, dirs, r, max_radius, n_march, tol,
              p](const double* v) -> double {
    if (lambda(v) >= r) return 0.0;
    std::array<double, kMaxFieldDim> pt{};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& dir : dirs) {
      // March outward to bracket the first crossing of {lambda = r}, then
      // bisect. No crossing along this direction: skip it.
      double lo = 0.0, hi = -1.0;
      for (int k = 1; k <= n_march; ++k) {
        const double rho = max_radius * static_cast<double>(k) / n_march;
        if (rho >= best) break;  // cannot improve on the current minimum
        for (int i = 0; i < p; ++i) pt[i] = v[i] + rho * dir[i];
        if (lambda(pt.data()) >= r) {
          hi = rho;
          break;
        }
        lo = rho;
      }
      if (hi < 0.0) continue;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        for (int i = 0; i < p; ++i) pt[i] = v[i] + mid * dir[i];
        if (lambda(pt.data()) >= r) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      best = std::min(best, hi);
    }
    if (!std::isfinite(best)) {
      throw EmptyBoundary(
          "no boundary of the degeneracy set within probe range");
    }
    return best;
  };

  // Emptiness scan: if lambda >= r on a dense sample of the working ball,
  // there is nothing to regularize and sigma_{r,N} is the plain retraction.
  NormalStream sg(derive_stream(probe.seed, {kTagLevelSet, 2}));
  bool any_low = false;
  {
    std::array<double, kMaxFieldDim> v{};
    for (int s = 0; s < 512; ++s) {
      ball_point(sg, p, 1.5 * N, v.data());
      if (lambda(v.data()) < r) {
        any_low = true;
        break;
      }
    }
  }

  RegularizedDiffusion out;
  out.boundary_empty = !any_low;
  out.lambda = lambda;
  out.r = r;
  if (any_low) {
    out.d_r = d_r;
  } else {
    out.d_r = [](const double*) { return 0.0; };
  }
  const bool use_d = any_low;
  const auto dfield = out.d_r;
  out.sigma = [sigma, dfield, use_d, N, p](const double* v, double* mat) {
    std::array<double, kMaxFieldDim> w{};
    double q = 0.0;
    for (int i = 0; i < p; ++i) q += v[i] * v[i];
    const double* arg = v;
    if (q > N * N) {
      const double s = N / std::sqrt(q);
      for (int i = 0; i < p; ++i) w[i] = s * v[i];
      arg = w.data();
    }
    if (sigma) {
      sigma(arg, mat);
    } else {
      std::fill(mat, mat + static_cast<std::size_t>(p) * p, 0.0);
    }
    if (use_d) {
      const double d = dfield(arg);
      if (d > 0.0) {
        for (int i = 0; i < p; ++i) mat[static_cast<std::size_t>(i) * p + i] += d;
      }
    }
  };

  // Validation: the regularized diffusion must be non-degenerate on the
  // working ball.
  NormalStream vg(derive_stream(probe.seed, {kTagLevelSet, 3}));
  double inf_lambda = std::numeric_limits<double>::infinity();
  {
    std::array<double, kMaxFieldDim> v{};
    for (int s = 0; s < 256; ++s) {
      ball_point(vg, p, N, v.data());
      inf_lambda = std::min(inf_lambda, smallest_singular_value(out.sigma, v.data(), p));
    }
  }
  out.inf_lambda_grid = inf_lambda;
  if (!(inf_lambda > 0.0)) {
    throw ViolationFound(
        "regularized diffusion is degenerate on the validation grid (min "
        "lambda = " +
        std::to_string(inf_lambda) + ")");
  }
  return out;
}

DrLipschitzReport d_r_lipschitz_check(const RegularizedDiffusion& reg, int p,
                                      double sample_radius, int n_pairs,
                                      std::uint64_t seed) {
  if (n_pairs < 1 || p < 1 || p > kMaxFieldDim || !(sample_radius > 0.0)) {
    throw std::invalid_argument("d_r_lipschitz_check: bad arguments");
  }
  NormalStream g(derive_stream(seed, {kTagLevelSet, 4}));
  std::array<double, kMaxFieldDim> v{}, w{};
  DrLipschitzReport rep;
  rep.n_pairs = n_pairs;
  const bool can_bias = static_cast<bool>(reg.lambda) && reg.r > 0.0;
  for (int s = 0; s < n_pairs; ++s) {
    // Bias half the first endpoints toward the degeneracy set (where d_r is
    // nonzero) using the cheap lambda probe; keep the last draw if no
    // attempt lands inside.
    ball_point(g, p, sample_radius, v.data());
    if (can_bias && s % 2 == 0) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        if (reg.lambda(v.data()) < reg.r) break;
        ball_point(g, p, sample_radius, v.data());
      }
    }
    double dq = 0.0;
    do {
      dq = 0.0;
      for (int i = 0; i < p; ++i) {
        w[i] = v[i] + 0.25 * sample_radius * g();
        dq += (v[i] - w[i]) * (v[i] - w[i]);
      }
    } while (dq < 1e-6 * sample_radius * sample_radius);
    const double dist = std::sqrt(dq);
    const double dv = reg.d_r(v.data());
    const double dw_ = reg.d_r(w.data());
    if (dv > 0.0 || dw_ > 0.0) ++rep.n_pairs_inside;
    rep.max_quotient = std::max(rep.max_quotient, std::fabs(dv - dw_) / dist);
  }
  return rep;
}

LinearizationReport linearization_error_scan(const Coefficients& coeffs,
                                             const InitialFn& u0,
                                             const std::vector<double>& t_grid,
                                             int n_replicas, std::uint64_t seed,
                                             const SolverConfig& base,
                                             exec policy) {
  if (t_grid.empty() || n_replicas < 1) {
    throw std::invalid_argument("linearization_error_scan: empty inputs");
  }
  SolverConfig cfg = base;
  cfg.seed = seed;
  cfg.initial_data = u0;
  cfg.snapshot_stride = 0;
  cfg.snapshot_times = t_grid;
  double t_max = 0.0;
  for (double t : t_grid) {
    const long m = std::llround(t / cfg.dt);
    if (m < 1) {
      throw std::invalid_argument(
          "linearization_error_scan: times must be >= dt");
    }
    t_max = std::max(t_max, static_cast<double>(m) * cfg.dt);
  }
  cfg.t_end = t_max;
  check_config(cfg, coeffs);

  const int p = cfg.p;
  const int J = cfg.n_sites;
  const int nq = J / 2;
  const std::vector<double> sites = solver_grid(J);

  // Snapped, deduplicated comparison times (what solve() will record).
  std::vector<double> times;
  {
    std::vector<long> ms;
    for (double t : t_grid) ms.push_back(std::llround(t / cfg.dt));
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    for (long m : ms) times.push_back(static_cast<double>(m) * cfg.dt);
  }
  const std::size_t n_times = times.size();

  // Deterministic part: the grid heat semigroup applied to u0, per time.
  std::vector<std::vector<double>> semi(n_times,
                                        std::vector<double>(static_cast<std::size_t>(J) * p, 0.0));
  if (u0) {
    RealFft fft(J);
    std::vector<double> g0(J);
    std::vector<std::complex<double>> spec0(nq + 1), spec(nq + 1);
    std::array<double, kMaxFieldDim> v{};
    std::vector<std::vector<double>> coord0(p, std::vector<double>(J));
    for (int j = 0; j < J; ++j) {
      u0(sites[j], v.data());
      for (int i = 0; i < p; ++i) coord0[i][j] = v[i];
    }
    for (int i = 0; i < p; ++i) {
      fft.forward(coord0[i].data(), spec0.data());
      for (std::size_t k = 0; k < n_times; ++k) {
        for (int q = 0; q <= nq; ++q) {
          spec[q] = spec0[q] *
                    (std::exp(-kPi * kPi * static_cast<double>(q) * q * times[k]) / J);
        }
        fft.inverse(spec.data(), g0.data());
        for (int j = 0; j < J; ++j) semi[k][static_cast<std::size_t>(j) * p + i] = g0[j];
      }
    }
  }

  // Diffusion frozen at the initial data, cached per site.
  std::vector<double> sig0(static_cast<std::size_t>(J) * p * p, 0.0);
  {
    std::array<double, kMaxFieldDim> v{};
    for (int j = 0; j < J; ++j) {
      if (u0) {
        u0(sites[j], v.data());
      } else {
        std::fill(v.begin(), v.begin() + p, 0.0);
      }
      if (coeffs.diffusion) {
        coeffs.diffusion(v.data(), sig0.data() + static_cast<std::size_t>(j) * p * p);
      }
    }
  }

  const Coefficients additive = make_coefficients("zero", "identity", p);
  SolverConfig cfg_h = cfg;
  cfg_h.initial_data = InitialFn();  // the comparison field starts at zero

  std::vector<std::vector<double>> err(n_replicas,
                                       std::vector<double>(n_times, 0.0));
  auto run_replica = [&](int r) {
    SolverConfig cu = cfg;
    cu.replica = cfg.replica + static_cast<std::uint64_t>(r);
    SolverConfig ch = cfg_h;
    ch.replica = cu.replica;
    const Trajectory tu = solve(cu, coeffs);
    const Trajectory th = solve(ch, additive);
    for (std::size_t k = 0; k < n_times; ++k) {
      double emax = 0.0;
      for (int j = 0; j < J; ++j) {
        const double* uu = tu.sample.values.data() +
                           (k * static_cast<std::size_t>(J) + j) * p;
        const double* hh = th.sample.values.data() +
                           (k * static_cast<std::size_t>(J) + j) * p;
        const double* sg = sig0.data() + static_cast<std::size_t>(j) * p * p;
        double q = 0.0;
        for (int i = 0; i < p; ++i) {
          double d = uu[i] - semi[k][static_cast<std::size_t>(j) * p + i];
          for (int l = 0; l < p; ++l) d -= sg[static_cast<std::size_t>(i) * p + l] * hh[l];
          q += d * d;
        }
        emax = std::max(emax, q);
      }
      err[r][k] = std::sqrt(emax);
    }
  };
  if (policy == exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < n_replicas; ++r) run_replica(r);
  } else {
    for (int r = 0; r < n_replicas; ++r) run_replica(r);
  }

  LinearizationReport rep;
  rep.times = times;
  rep.n_replicas = n_replicas;
  rep.mean_error.assign(n_times, 0.0);
  rep.rms_error.assign(n_times, 0.0);
  rep.k4_error.assign(n_times, 0.0);
  for (std::size_t k = 0; k < n_times; ++k) {
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (int r = 0; r < n_replicas; ++r) {
      const double e = err[r][k];
      s1 += e;
      s2 += e * e;
      s4 += e * e * e * e;
      rep.max_error = std::max(rep.max_error, e);
    }
    rep.mean_error[k] = s1 / n_replicas;
    rep.rms_error[k] = std::sqrt(s2 / n_replicas);
    rep.k4_error[k] = std::pow(s4 / n_replicas, 0.25);
  }

  auto fit_slope = [&](const std::vector<double>& e) {
    if (n_times < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < n_times; ++k) {
      if (!(e[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
      lx.push_back(std::log(times[k]));
      ly.push_back(std::log(e[k]));
    }
    return least_squares(lx, ly).slope;
  };
  rep.slope_mean = fit_slope(rep.mean_error);
  rep.slope_k2 = fit_slope(rep.rms_error);
  rep.slope_k4 = fit_slope(rep.k4_error);
  return rep;
}

MomentScanReport increment_moment_scan(const std::vector<Trajectory>& ensemble,
                                       double base_time,
                                       const std::vector<double>& space_seps,
                                       const std::vector<double>& time_seps) {
  if (ensemble.empty()) {
    throw std::invalid_argument("increment_moment_scan: empty ensemble");
  }
  const FieldSample& s0 = ensemble[0].sample;
  const int J = static_cast<int>(s0.sites.size());
  const int p = s0.p;
  const std::size_t n_times = s0.times.size();
  const double h = 2.0 / J;

  auto time_index = [&](double t) -> std::size_t {
    for (std::size_t k = 0; k < n_times; ++k) {
      if (std::fabs(s0.times[k] - t) <= 1e-9 * (1.0 + std::fabs(t))) return k;
    }
    throw std::invalid_argument(
        "increment_moment_scan: time not recorded in the ensemble");
  };
  const std::size_t bi = time_index(base_time);

  std::vector<int> offsets;
  for (double d : space_seps) {
    const long o = std::llround(d / h);
    if (o < 1 || o >= J || std::fabs(static_cast<double>(o) * h - d) > 1e-9) {
      throw std::invalid_argument(
          "increment_moment_scan: separation is not a whole number of cells");
    }
    offsets.push_back(static_cast<int>(o));
  }
  std::vector<std::size_t> tidx;
  for (double s : time_seps) tidx.push_back(time_index(base_time - s));

  MomentScanReport rep;
  rep.space_sep = space_seps;
  rep.time_sep = time_seps;
  rep.space_energy.assign(space_seps.size(), 0.0);
  rep.time_energy.assign(time_seps.size(), 0.0);

  for (const Trajectory& traj : ensemble) {
    if (traj.blew_up) {
      throw std::invalid_argument(
          "increment_moment_scan: ensemble contains a blown-up run");
    }
    const FieldSample& fs = traj.sample;
    if (static_cast<int>(fs.sites.size()) != J || fs.p != p ||
        fs.times.size() != n_times) {
      throw std::invalid_argument(
          "increment_moment_scan: inhomogeneous ensemble");
    }
    const double* base = fs.values.data() + bi * static_cast<std::size_t>(J) * p;
    for (std::size_t a = 0; a < offsets.size(); ++a) {
      const int o = offsets[a];
      double acc = 0.0;
      for (int j = 0; j < J; ++j) {
        const int jz = j + o < J ? j + o : j + o - J;
        const double* x = base + static_cast<std::size_t>(j) * p;
        const double* z = base + static_cast<std::size_t>(jz) * p;
        for (int i = 0; i < p; ++i) acc += (x[i] - z[i]) * (x[i] - z[i]);
      }
      rep.space_energy[a] += acc;
    }
    for (std::size_t a = 0; a < tidx.size(); ++a) {
      const double* other =
          fs.values.data() + tidx[a] * static_cast<std::size_t>(J) * p;
      double acc = 0.0;
      for (int j = 0; j < J; ++j) {
        const double* x = base + static_cast<std::size_t>(j) * p;
        const double* z = other + static_cast<std::size_t>(j) * p;
        for (int i = 0; i < p; ++i) acc += (x[i] - z[i]) * (x[i] - z[i]);
      }
      rep.time_energy[a] += acc;
    }
  }
  const double scale = 1.0 / (static_cast<double>(ensemble.size()) * J);
  for (double& e : rep.space_energy) e *= scale;
  for (double& e : rep.time_energy) e *= scale;

  auto fit = [&](const std::vector<double>& sep,
                 const std::vector<double>& energy, double& slope) {
    if (sep.size() < 2) {
      slope = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    std::vector<double> lx, ly;
    for (std::size_t a = 0; a < sep.size(); ++a) {
      if (energy[a] < 1e-30) {
        rep.degenerate = true;
        slope = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      lx.push_back(std::log(sep[a]));
      ly.push_back(std::log(energy[a]));
    }
    slope = least_squares(lx, ly).slope;
  };
  fit(rep.space_sep, rep.space_energy, rep.slope_space);
  fit(rep.time_sep, rep.time_energy, rep.slope_time);
  return rep;
}

BdgReport bdg_bound_check(int p, double t, double x, int n_replicas,
                          int n_modes, const std::vector<int>& ks,
                          std::uint64_t seed, double sigma_sup) {
  if (p < 1 || !(t > 0.0) || n_replicas < 2 || n_modes < 1 || ks.empty()) {
    throw std::invalid_argument("bdg_bound_check: bad arguments");
  }
  for (int k : ks) {
    if (k < 2 || k % 2 != 0) {
      throw std::invalid_argument("bdg_bound_check: moments must be even");
    }
  }
  const double var = variance_of_H(t);
  // Accumulate ||H(t,x)||^k per replica, exact spectral sampler.
  std::vector<double> sum(ks.size(), 0.0), sumsq(ks.size(), 0.0);
  for (int r = 0; r < n_replicas; ++r) {
    SpectralState state = make_state(p, n_modes, seed, static_cast<std::uint64_t>(r));
    evolve(state, t);
    const std::vector<double> vals = eval_at(state, x);
    double q = 0.0;
    for (double v : vals) q += v * v;
    for (std::size_t a = 0; a < ks.size(); ++a) {
      const double m = std::pow(q, ks[a] / 2.0);
      sum[a] += m;
      sumsq[a] += m * m;
    }
  }
  BdgReport rep;
  rep.variance_used = var;
  for (std::size_t a = 0; a < ks.size(); ++a) {
    BdgReport::Row row;
    row.k = ks[a];
    row.empirical = sum[a] / n_replicas;
    const double v =
        std::max(0.0, sumsq[a] / n_replicas - row.empirical * row.empirical);
    row.std_error = std::sqrt(v / n_replicas);
    row.bound =
        std::pow(4.0 * row.k * p * sigma_sup * sigma_sup * var, ks[a] / 2.0);
    row.ok = row.empirical <= row.bound + 3.0 * row.std_error;
    rep.rows.push_back(row);
  }
  return rep;
}

Coefficients make_coefficients(const std::string& drift_name,
                               const std::string& diffusion_name, int p,
                               double diffusion_param) {
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("make_coefficients: bad dimension");
  }
  Coefficients co;
  co.p = p;
  if (drift_name == "zero") {
    co.lip_drift = 0.0;
    co.drift_bounded = true;
    co.drift_sup = 0.0;
  } else if (drift_name == "linear_decay") {
    co.drift = [p](const double* v, double* out) {
      for (int i = 0; i < p; ++i) out[i] = -v[i];
    };
    co.lip_drift = 1.0;
    co.drift_bounded = false;
  } else if (drift_name == "saturating") {
    co.drift = [p](const double* v, double* out) {
      double q = 0.0;
      for (int i = 0; i < p; ++i) q += v[i] * v[i];
      const double s = -1.0 / (1.0 + std::sqrt(q));
      for (int i = 0; i < p; ++i) out[i] = s * v[i];
    };
    co.lip_drift = 1.0;
    co.drift_bounded = true;
    co.drift_sup = 1.0;
  } else {
    throw std::invalid_argument("make_coefficients: unknown drift '" +
                                drift_name + "'");
  }
  const double a = diffusion_param;
  if (diffusion_name == "zero") {
    co.lip_diffusion = 0.0;
    co.diffusion_bounded = true;
    co.diffusion_sup = 0.0;
  } else if (diffusion_name == "identity") {
    co.diffusion = [p](const double*, double* out) {
      std::fill(out, out + static_cast<std::size_t>(p) * p, 0.0);
      for (int i = 0; i < p; ++i) out[static_cast<std::size_t>(i) * p + i] = 1.0;
    };
    co.lip_diffusion = 0.0;
    co.diffusion_bounded = true;
    co.diffusion_sup = 1.0;
  } else if (diffusion_name == "constant") {
    co.diffusion = [p, a](const double*, double* out) {
      std::fill(out, out + static_cast<std::size_t>(p) * p, 0.0);
      for (int i = 0; i < p; ++i) out[static_cast<std::size_t>(i) * p + i] = a;
    };
    co.lip_diffusion = 0.0;
    co.diffusion_bounded = true;
    co.diffusion_sup = std::fabs(a);
  } else if (diffusion_name == "sin_diag") {
    co.diffusion = [p, a](const double* v, double* out) {
      std::fill(out, out + static_cast<std::size_t>(p) * p, 0.0);
      const double s = 1.0 + a * std::sin(v[0]);
      for (int i = 0; i < p; ++i) out[static_cast<std::size_t>(i) * p + i] = s;
    };
    co.lip_diffusion = std::fabs(a) * std::sqrt(static_cast<double>(p));
    co.diffusion_bounded = true;
    co.diffusion_sup = 1.0 + std::fabs(a);
  } else if (diffusion_name == "diag_v1") {
    co.diffusion = [p](const double* v, double* out) {
      std::fill(out, out + static_cast<std::size_t>(p) * p, 0.0);
      out[0] = v[0];
      for (int i = 1; i < p; ++i) out[static_cast<std::size_t>(i) * p + i] = 1.0;
    };
    co.lip_diffusion = 1.0;
    co.diffusion_bounded = false;
  } else {
    throw std::invalid_argument("make_coefficients: unknown diffusion '" +
                                diffusion_name + "'");
  }
  return co;
}

InitialFn make_initial(const std::string& name, int p, double a, double b) {
  if (p < 1 || p > kMaxFieldDim) {
    throw std::invalid_argument("make_initial: bad dimension");
  }
  if (name == "zero") return InitialFn();
  if (name == "constant") {
    return [p, a](double, double* out) {
      for (int i = 0; i < p; ++i) out[i] = a;
    };
  }
  if (name == "cosine") {
    return [p, a, b](double x, double* out) {
      const double c = a * std::cos(kPi * b * x);
      for (int i = 0; i < p; ++i) out[i] = c / (1.0 + i);
    };
  }
  if (name == "weierstrass") {
    // Lacunary cosine series with uniform Hoelder-1/2 regularity: the m-th
    // term has amplitude 2^{-m/2} at frequency 2^m.
    return [p, a](double x, double* out) {
      double s = 0.0;
      double amp = 1.0;
      double freq = 1.0;
      for (int m = 0; m <= 12; ++m) {
        s += amp * std::cos(kPi * freq * x);
        amp *= 1.0 / std::sqrt(2.0);
        freq *= 2.0;
      }
      for (int i = 0; i < p; ++i) out[i] = a * s / (1.0 + i);
    };
  }
  throw std::invalid_argument("make_initial: unknown initial data '" + name +
                              "'");
}

}  // namespace torusheat
