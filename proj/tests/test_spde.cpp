#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "torusheat/errors.hpp"
#include "torusheat/gaussian_field.hpp"
#include "torusheat/heat_kernel.hpp"
#include "torusheat/spde.hpp"
#include "torusheat/torus.hpp"

using namespace torusheat;

namespace {

constexpr double kPi = std::numbers::pi;

// Kolmogorov-Smirnov distance of samples against N(0, var).
double ks_against_normal(std::vector<double> samples, double var) {
  std::sort(samples.begin(), samples.end());
  const double sd = std::sqrt(var);
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-samples[i] / (sd * std::sqrt(2.0)));
    d = std::max(d, std::fabs((double(i) + 1.0) / n - cdf));
    d = std::max(d, std::fabs(double(i) / n - cdf));
  }
  return d;
}

// Value of coordinate i at site j in snapshot k of a trajectory.
double at(const Trajectory& tr, std::size_t k, int j, int i) {
  const int J = int(tr.sample.sites.size());
  return tr.sample.values[(k * std::size_t(J) + j) * tr.sample.p + i];
}

}  // namespace

TEST_SUITE_BEGIN("spde");

TEST_CASE("constant data with no drift and no noise is a fixed point") {
  // The grid heat semigroup is exact on Fourier modes and a constant field
  // lives entirely in mode zero, whose multiplier is exactly 1 for a
  // power-of-two grid. The value must come back bit for bit.
  SolverConfig cfg;
  cfg.p = 2;
  cfg.n_sites = 64;
  cfg.dt = 1e-3;
  cfg.t_end = 0.02;
  cfg.initial_data = make_initial("constant", 2, 0.8125);
  Coefficients co = make_coefficients("zero", "zero", 2);
  Trajectory tr = solve(cfg, co);
  REQUIRE(tr.sample.times.size() == 1);
  CHECK(tr.sample.times[0] == doctest::Approx(0.02));
  for (int j = 0; j < 64; ++j) {
    for (int i = 0; i < 2; ++i) {
      CHECK(at(tr, 0, j, i) == 0.8125);
    }
  }
  CHECK(tr.sup_norm.size() == 21);
  CHECK(tr.sup_norm[0] == doctest::Approx(0.8125 * std::sqrt(2.0)));
  CHECK_FALSE(tr.blew_up);
}

TEST_CASE("deterministic linear drift reduces to the scalar ODE") {
  // With u_0 constant and b(v) = -v the field stays spatially constant and
  // obeys u_{m+1} = (1 - dt) u_m, the explicit Euler recursion for
  // u' = -u. Oracle: |(1 - dt)^M - e^{-1}| < dt at t = 1.
  SolverConfig cfg;
  cfg.p = 1;
  cfg.n_sites = 16;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.initial_data = make_initial("constant", 1, 1.0);
  Coefficients co = make_coefficients("linear_decay", "zero", 1);
  Trajectory tr = solve(cfg, co);
  REQUIRE(tr.sample.times.size() == 1);
  const double expected = std::exp(-1.0);
  for (int j = 0; j < 16; ++j) {
    CHECK(std::fabs(at(tr, 0, j, 0) - expected) < cfg.dt);
  }
  // All sites carry the same constant.
  CHECK(at(tr, 0, 3, 0) == at(tr, 0, 11, 0));
}

TEST_CASE("additive noise reproduces the grid field variance") {
  // b == 0, sigma == I, u_0 == 0: every mode performs its exact
  // Ornstein-Uhlenbeck transition, so u(t, x) has single-point variance
  // grid_field_variance -- the exact mode sum restricted to the J grid
  // frequencies -- at every dt. Only Monte Carlo error remains.
  SolverConfig cfg;
  cfg.p = 1;
  cfg.n_sites = 64;
  cfg.dt = 2.5e-4;
  cfg.t_end = 0.25;
  cfg.seed = 2024;
  Coefficients co = make_coefficients("zero", "identity", 1);
  const int n_rep = 500;
  std::vector<Trajectory> ens = solve_ensemble(cfg, co, n_rep);
  double acc = 0.0;
  for (const Trajectory& tr : ens) {
    REQUIRE(tr.sample.times.size() == 1);
    for (int j = 0; j < cfg.n_sites; ++j) acc += at(tr, 0, j, 0) * at(tr, 0, j, 0);
  }
  const double emp = acc / (double(n_rep) * cfg.n_sites);
  const double target = grid_field_variance(0.25, 64);
  // The grid law omits modes beyond J/2; the gap is the series tail,
  // about 1/(pi^2 J) here.
  CHECK(target < variance_of_H(0.25));
  CHECK(target == doctest::Approx(variance_of_H(0.25)).epsilon(0.02));
  CHECK(emp == doctest::Approx(target).epsilon(0.1));
}

TEST_CASE("runs are reproducible and replicas are independent") {
  SolverConfig cfg;
  cfg.p = 2;
  cfg.n_sites = 64;
  cfg.dt = 1e-3;
  cfg.t_end = 0.05;
  cfg.seed = 77;
  cfg.initial_data = make_initial("cosine", 2);
  Coefficients co = make_coefficients("saturating", "sin_diag", 2, 0.25);

  Trajectory a = solve(cfg, co);
  Trajectory b = solve(cfg, co);
  CHECK(a.sample.values == b.sample.values);
  CHECK(a.sup_norm == b.sup_norm);

  SolverConfig cfg2 = cfg;
  cfg2.replica = 1;
  Trajectory c = solve(cfg2, co);
  CHECK(a.sample.values != c.sample.values);

  // Ensemble replica r reproduces a direct run with replica key r, and the
  // serial policy matches the parallel one bit for bit.
  std::vector<Trajectory> par = solve_ensemble(cfg, co, 3, exec::parallel);
  std::vector<Trajectory> ser = solve_ensemble(cfg, co, 3, exec::serial);
  for (int r = 0; r < 3; ++r) {
    CHECK(par[r].sample.values == ser[r].sample.values);
  }
  CHECK(par[0].sample.values == a.sample.values);
  CHECK(par[1].sample.values == c.sample.values);
}

TEST_CASE("translating noise and initial data translates the solution") {
  // The scheme is equivariant under grid rotations: shifting the synthesized
  // noise arrays by o cells and the initial data by o grid cells shifts the
  // solution by o cells. Initial grids match bit for bit (dyadic shifts are
  // exact); the Fourier filter rounds differently on rotated data, so the
  // comparison is at 1e-12, far below any statistical scale.
  const int J = 64;
  const int o = 5;
  const double h = 2.0 / J;
  InitialFn f = make_initial("cosine", 2);
  SolverConfig cfg;
  cfg.p = 2;
  cfg.n_sites = J;
  cfg.dt = 1e-3;
  cfg.t_end = 0.04;
  cfg.seed = 99;
  cfg.initial_data = f;
  Coefficients co = make_coefficients("saturating", "sin_diag", 2, 0.25);
  Trajectory base = solve(cfg, co);

  SolverConfig shifted = cfg;
  shifted.noise_grid_shift = o;
  shifted.initial_data = [f, o, h](double x, double* out) {
    f(torus_wrap(x + o * h), out);
  };
  Trajectory moved = solve(shifted, co);

  for (int j = 0; j < J; ++j) {
    const int js = (j + o) % J;
    for (int i = 0; i < 2; ++i) {
      CHECK(std::fabs(at(moved, 0, j, i) - at(base, 0, js, i)) < 1e-12);
    }
  }
}

TEST_CASE("diagnostics agree with the recorded snapshots") {
  SolverConfig cfg;
  cfg.p = 2;
  cfg.n_sites = 32;
  cfg.dt = 1e-3;
  cfg.t_end = 0.02;
  cfg.seed = 5;
  cfg.initial_data = make_initial("cosine", 2);
  cfg.snapshot_stride = 1;
  cfg.track_lambda = true;
  cfg.stop_norm_threshold = 0.5;
  cfg.stop_lambda_threshold = 0.8;
  Coefficients co = make_coefficients("linear_decay", "sin_diag", 2, 0.25);
  Trajectory tr = solve(cfg, co);

  REQUIRE(tr.n_steps == 20);
  REQUIRE(tr.sample.times.size() == 21);
  REQUIRE(tr.sup_norm.size() == 21);
  REQUIRE(tr.min_lambda.size() == 21);

  long first_norm = -1, first_lam = -1;
  for (std::size_t m = 0; m < 21; ++m) {
    double smax = 0.0;
    double lmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 32; ++j) {
      double v[2] = {at(tr, m, j, 0), at(tr, m, j, 1)};
      smax = std::max(smax, v[0] * v[0] + v[1] * v[1]);
      lmin = std::min(lmin, smallest_singular_value(co.diffusion, v, 2));
    }
    CHECK(tr.sup_norm[m] == std::sqrt(smax));
    CHECK(tr.min_lambda[m] == lmin);
    if (first_norm < 0 && std::sqrt(smax) >= cfg.stop_norm_threshold) first_norm = long(m);
    if (first_lam < 0 && lmin <= cfg.stop_lambda_threshold) first_lam = long(m);
  }
  CHECK(tr.first_norm_hit == first_norm);
  CHECK(tr.first_lambda_hit == first_lam);
  CHECK(tr.first_norm_hit == 0);  // the initial data already exceeds 0.5
}

TEST_CASE("non-finite values flag the run and truncate the record") {
  // An unstable drift makes the explicit part overflow within a few dozen
  // steps; the run must stop, keep only the snapshots already recorded, and
  // mark the blow-up step.
  SolverConfig cfg;
  cfg.p = 1;
  cfg.n_sites = 8;
  cfg.dt = 1e-3;
  cfg.t_end = 0.05;
  cfg.initial_data = make_initial("constant", 1, 1.0);
  cfg.snapshot_stride = 10;
  Coefficients co;
  co.p = 1;
  co.drift = [](const double* v, double* out) { out[0] = 1e12 * v[0]; };
  co.lip_drift = 1e12;
  Trajectory tr = solve(cfg, co);
  CHECK(tr.blew_up);
  CHECK(tr.blow_up_step > 0);
  CHECK(tr.blow_up_step <= 50);
  CHECK(std::isnan(tr.sup_norm.back()));
  CHECK(tr.sup_norm.size() == std::size_t(tr.blow_up_step) + 1);
  CHECK(tr.sample.times.size() * 8 == tr.sample.values.size());
  CHECK(tr.sample.times.size() < 7);  // full run would record 6 + final
  for (double t : tr.sample.times) {
    CHECK(std::llround(t / cfg.dt) < tr.blow_up_step);
  }
}

TEST_CASE("config validation rejects malformed runs") {
  Coefficients co = make_coefficients("zero", "zero", 1);
  SolverConfig cfg;
  cfg.p = 1;

  SolverConfig bad = cfg;
  bad.n_sites = 63;  // odd
  CHECK_THROWS_AS(solve(bad, co), std::invalid_argument);
  bad = cfg;
  bad.t_end = 0.00123456;  // not a whole number of dt = 1e-3 steps
  CHECK_THROWS_AS(solve(bad, co), std::invalid_argument);
  bad = cfg;
  bad.scheme = "explicit-euler";
  CHECK_THROWS_AS(solve(bad, co), std::invalid_argument);
  bad = cfg;
  bad.n_modes = 999;
  CHECK_THROWS_AS(solve(bad, co), std::invalid_argument);
  Coefficients co2 = make_coefficients("zero", "zero", 2);
  CHECK_THROWS_AS(solve(cfg, co2), std::invalid_argument);
}

TEST_CASE("declared Lipschitz constants survive a quotient audit") {
  Coefficients co = make_coefficients("saturating", "sin_diag", 3, 0.25);
  LipschitzReport rep = validate_lipschitz(co, 4000, 11);
  CHECK(rep.ok);
  CHECK(rep.max_drift_quotient <= 1.0 + 1e-9);
  CHECK(rep.max_drift_quotient > 0.2);  // the probe is not vacuous
  CHECK(rep.max_diffusion_quotient <= 0.25 * std::sqrt(3.0) + 1e-9);
  CHECK(rep.max_diffusion_quotient > 0.1);

  // A false declaration is caught.
  Coefficients lying = co;
  lying.lip_diffusion = 0.01;
  CHECK_FALSE(validate_lipschitz(lying, 4000, 11).ok);
}

TEST_CASE("drift truncation retracts to the ball and bounds the sup") {
  Coefficients co = make_coefficients("linear_decay", "zero", 2);
  Coefficients cut = truncate_drift(co, 1.0);
  CHECK(cut.drift_bounded);

  double v[2] = {0.3, -0.4};
  double out[2];
  cut.drift(v, out);
  CHECK(out[0] == -0.3);  // inside the ball: exactly the original drift
  CHECK(out[1] == 0.4);

  double far[2] = {3.0, 0.0};
  cut.drift(far, out);
  CHECK(out[0] == doctest::Approx(-1.0));
  CHECK(out[1] == doctest::Approx(0.0));

  // ||b_N|| attains 1 on the boundary sphere; the probe samples it exactly.
  CHECK(cut.drift_sup == doctest::Approx(1.0).epsilon(1e-12));

  // The retraction is 1-Lipschitz, so the declared constant still holds.
  CHECK(validate_lipschitz(cut, 2000, 3).ok);

  // Truncating a null drift stays null and bounded by zero.
  Coefficients none = truncate_drift(make_coefficients("zero", "zero", 2), 2.0);
  CHECK_FALSE(static_cast<bool>(none.drift));
  CHECK(none.drift_sup == 0.0);
}

TEST_CASE("smallest eigenvalue of the diffusion Gram matrix") {
  Coefficients id = make_coefficients("zero", "identity", 2);
  double v[2] = {0.7, -0.2};
  CHECK(smallest_singular_value(id.diffusion, v, 2) == doctest::Approx(1.0));

  DiffusionFn diag23 = [](const double*, double* out) {
    out[0] = 2.0; out[1] = 0.0; out[2] = 0.0; out[3] = 3.0;
  };
  CHECK(smallest_singular_value(diag23, v, 2) == doctest::Approx(4.0));

  CHECK(smallest_singular_value(DiffusionFn(), v, 2) == 0.0);

  DiffusionFn thin = [](const double*, double* out) {
    out[0] = 0.3; out[1] = 0.0; out[2] = 0.0; out[3] = 1.0;
  };
  CHECK(smallest_singular_value(thin, v, 2) == doctest::Approx(0.09));

  // Non-diagonal: [[0,2],[1,0]] has Gram diag(1,4).
  DiffusionFn swapd = [](const double*, double* out) {
    out[0] = 0.0; out[1] = 2.0; out[2] = 1.0; out[3] = 0.0;
  };
  CHECK(smallest_singular_value(swapd, v, 2) == doctest::Approx(1.0));
}

TEST_CASE("sqrt(lambda) inherits the diffusion Lipschitz constant") {
  // sigma = (1 + a sin v_1) I: sqrt(lambda) = 1 + a sin v_1, a-Lipschitz.
  Coefficients co = make_coefficients("zero", "sin_diag", 2, 0.25);
  SqrtLambdaReport rep = sqrt_lambda_lipschitz_check(co.diffusion, 2, 0.25, 3000, 7);
  CHECK(rep.max_quotient <= 0.25 * (1.0 + 1e-6));
  CHECK(rep.max_quotient > 0.1);

  // Constant diffusion: quotients are exactly zero.
  Coefficients cst = make_coefficients("zero", "constant", 2, 0.8);
  SqrtLambdaReport rc = sqrt_lambda_lipschitz_check(cst.diffusion, 2, 0.0, 500, 7);
  CHECK(rc.max_quotient == 0.0);

  // diag(v_1, 1): sqrt(lambda) = min(|v_1|, 1) is 1-Lipschitz; declaring
  // less must throw.
  Coefficients dv = make_coefficients("zero", "diag_v1", 2);
  CHECK_NOTHROW(sqrt_lambda_lipschitz_check(dv.diffusion, 2, 1.0, 3000, 7));
  CHECK_THROWS_AS(sqrt_lambda_lipschitz_check(dv.diffusion, 2, 0.1, 3000, 7),
                  ViolationFound);
}

TEST_CASE("diffusion regularization: non-degenerate case is a no-op") {
  Coefficients id = make_coefficients("zero", "identity", 2);
  RegularizedDiffusion reg = regularize_sigma(id.diffusion, 2, 0.01, 2.0);
  CHECK(reg.boundary_empty);
  CHECK(reg.inf_lambda_grid == doctest::Approx(1.0));
  double v[2] = {0.3, 0.4};
  double mat[4];
  reg.sigma(v, mat);
  CHECK(mat[0] == 1.0);
  CHECK(mat[1] == 0.0);
  CHECK(mat[3] == 1.0);
  CHECK(reg.d_r(v) == 0.0);
}

TEST_CASE("diffusion regularization lifts a degenerate direction") {
  // sigma(v) = diag(v_1, 1) is degenerate on the slab {lambda < r} =
  // {|v_1| < sqrt(r)}. With r = 0.01 the boundary is {|v_1| = 0.1}; from
  // v = (0.04, 0.7) the nearest crossing lies along +e_1 at distance 0.06.
  Coefficients dv = make_coefficients("zero", "diag_v1", 2);
  RegularizedDiffusion reg = regularize_sigma(dv.diffusion, 2, 0.01, 2.0);
  CHECK_FALSE(reg.boundary_empty);
  CHECK(reg.inf_lambda_grid > 0.0);

  double v[2] = {0.04, 0.7};
  CHECK(reg.d_r(v) == doctest::Approx(0.06).epsilon(1e-6));
  double mat[4];
  reg.sigma(v, mat);
  CHECK(mat[0] == doctest::Approx(0.10).epsilon(1e-6));
  CHECK(mat[1] == 0.0);
  CHECK(mat[2] == 0.0);
  CHECK(mat[3] == doctest::Approx(1.06).epsilon(1e-6));
  // The lifted matrix sits exactly on the threshold: lambda = r.
  CHECK(smallest_singular_value(reg.sigma, v, 2) == doctest::Approx(0.01).epsilon(1e-4));

  // Points with lambda >= r pass through untouched.
  double ok[2] = {0.5, 0.3};
  CHECK(reg.d_r(ok) == 0.0);
  reg.sigma(ok, mat);
  CHECK(mat[0] == 0.5);
  CHECK(mat[3] == 1.0);

  // Beyond the working ball the argument is retracted to ||v|| = N.
  double far[2] = {4.0, 0.0};
  reg.sigma(far, mat);
  CHECK(mat[0] == doctest::Approx(2.0));
  CHECK(mat[3] == doctest::Approx(1.0));

  // The probed distance field is 1-Lipschitz up to probe slack.
  DrLipschitzReport lip = d_r_lipschitz_check(reg, 2, 1.5, 200, 13);
  CHECK(lip.max_quotient <= 1.0 + 1e-6);
  CHECK(lip.n_pairs_inside >= 10);

  // A diffusion that is degenerate everywhere has no boundary to probe.
  CHECK_THROWS_AS(regularize_sigma(DiffusionFn(), 2, 0.01, 2.0), EmptyBoundary);
}

TEST_CASE("linearization error collapses to round-off for constant sigma") {
  // For sigma = c I the full run and the additive run perform the same
  // arithmetic up to scaling, so the measured error is transform round-off,
  // orders of magnitude below the 10 dt yardstick.
  SolverConfig base;
  base.p = 1;
  base.n_sites = 64;
  base.dt = 1e-3;
  Coefficients co = make_coefficients("zero", "constant", 1, 0.8);
  LinearizationReport rep = linearization_error_scan(
      co, make_initial("cosine", 1), {0.004, 0.016, 0.064}, 8, 21, base);
  CHECK(rep.times.size() == 3);
  CHECK(rep.max_error < 10.0 * base.dt);
  CHECK(rep.max_error < 1e-10);
}

TEST_CASE("linearization error of a state-dependent diffusion shrinks like sqrt(t)") {
  SolverConfig base;
  base.p = 2;
  base.n_sites = 128;
  base.dt = 1e-5;
  Coefficients co = make_coefficients("zero", "sin_diag", 2, 0.5);
  const std::vector<double> t_grid = {1e-3, 2e-3, 4e-3, 8e-3};
  LinearizationReport rep = linearization_error_scan(
      co, make_initial("cosine", 2), t_grid, 40, 4242, base);
  REQUIRE(rep.times.size() == 4);
  for (double e : rep.rms_error) CHECK(e > 0.0);
  CHECK(rep.slope_k2 > 0.3);
  CHECK(rep.slope_k2 < 0.7);
  // Errors are small in absolute terms at these times (max over replicas
  // and times is a tail statistic; the slope above is the real assertion).
  CHECK(rep.max_error < 0.25);
}

TEST_CASE("increment energies recover the second-moment exponents") {
  // Additive equation at t = 0.125: spatial increment energy scales like
  // d^1 and temporal like s^{1/2}. The scheme's energy deficit is
  // O(sqrt(dt)), so separations sit well above the step size.
  SolverConfig cfg;
  cfg.p = 1;
  cfg.n_sites = 512;
  cfg.dt = 1e-4;
  cfg.t_end = 0.125;
  cfg.seed = 31337;
  const std::vector<double> time_seps = {0.016, 0.032, 0.064};
  cfg.snapshot_times = {0.125 - 0.016, 0.125 - 0.032, 0.125 - 0.064};
  Coefficients co = make_coefficients("zero", "identity", 1);
  std::vector<Trajectory> ens = solve_ensemble(cfg, co, 120);

  const double h = 2.0 / 512;
  const std::vector<double> space_seps = {8 * h, 16 * h, 32 * h, 64 * h};
  MomentScanReport rep = increment_moment_scan(ens, 0.125, space_seps, time_seps);
  CHECK_FALSE(rep.degenerate);
  CHECK(rep.slope_space > 0.75);
  CHECK(rep.slope_space < 1.25);
  CHECK(rep.slope_time > 0.35);
  CHECK(rep.slope_time < 0.65);

  // Against the closed-form energies of the exact field the measured values
  // agree to the known O(sqrt(dt)) deficit plus sampling error.
  for (std::size_t a = 0; a < space_seps.size(); ++a) {
    const double exact = spatial_increment_energy(0.125, 0.0, space_seps[a]);
    CHECK(rep.space_energy[a] == doctest::Approx(exact).epsilon(0.25));
  }
  // At the smallest separation the deficit (about 10%) clears the sampling
  // noise (a few %): the discrete energy must fall below the exact one.
  CHECK(rep.space_energy[0] < spatial_increment_energy(0.125, 0.0, space_seps[0]));
  for (std::size_t a = 0; a < time_seps.size(); ++a) {
    // Full increment = shared-noise window part + an independent fresh part
    // distributed like the field at time s.
    const double s = time_seps[a];
    const double exact =
        temporal_increment_energy(0.125 - s, 0.125) + variance_of_H(s);
    CHECK(rep.time_energy[a] == doctest::Approx(exact).epsilon(0.3));
  }
}

TEST_CASE("increment scan flags a deterministic ensemble as degenerate") {
  SolverConfig cfg;
  cfg.p = 1;
  cfg.n_sites = 32;
  cfg.dt = 1e-3;
  cfg.t_end = 0.02;
  cfg.initial_data = make_initial("constant", 1, 0.5);
  cfg.snapshot_times = {0.01};
  Coefficients co = make_coefficients("zero", "zero", 1);
  std::vector<Trajectory> ens = solve_ensemble(cfg, co, 2);
  const double h = 2.0 / 32;
  MomentScanReport rep = increment_moment_scan(ens, 0.02, {h, 2 * h}, {0.01});
  CHECK(rep.degenerate);
  CHECK(std::isnan(rep.slope_space));

  // Unrecorded times and non-grid separations are rejected.
  CHECK_THROWS_AS(increment_moment_scan(ens, 0.013, {h}, {}), std::invalid_argument);
  CHECK_THROWS_AS(increment_moment_scan(ens, 0.02, {h * 1.5}, {}), std::invalid_argument);
}

TEST_CASE("distribution of the additive solution matches the exact law at every dt") {
  // With b == 0 and sigma == I each mode performs its exact
  // Ornstein-Uhlenbeck transition, so the one-point law is exactly
  // N(0, grid_field_variance) regardless of step size -- even when dt
  // equals the whole horizon. The Kolmogorov-Smirnov distance against
  // that normal must therefore sit at the Monte-Carlo floor
  // (~1.36 / sqrt(2000) ~ 0.03) for every dt in the ladder.
  const double t = 4e-4;
  const int J = 256;
  Coefficients co = make_coefficients("zero", "identity", 1);
  const double var = grid_field_variance(t, J);
  for (double dt : {4e-4, 1e-4, 2.5e-5}) {
    SolverConfig cfg;
    cfg.p = 1;
    cfg.n_sites = J;
    cfg.dt = dt;
    cfg.t_end = t;
    cfg.seed = 424242;
    std::vector<Trajectory> ens = solve_ensemble(cfg, co, 2000);
    std::vector<double> samples;
    samples.reserve(ens.size());
    for (const Trajectory& tr : ens) samples.push_back(at(tr, 0, J / 2, 0));
    CHECK(ks_against_normal(std::move(samples), var) < 0.05);
  }
}

TEST_CASE("even moments of the stochastic convolution respect the closed-form bound") {
  BdgReport rep = bdg_bound_check(2, 0.5, 0.25, 4000, 256, {2, 4, 8}, 8080);
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) {
    CHECK(row.ok);
    CHECK(row.empirical > 0.0);
    CHECK(row.empirical < row.bound);  // the bound is loose by design
  }
  // k = 2 has a sharp oracle: E ||H||^2 = p Var(t) for sigma == I.
  const double exact = 2.0 * variance_of_H(0.5);
  CHECK(rep.rows[0].empirical == doctest::Approx(exact).epsilon(0.1));
  CHECK(std::fabs(rep.rows[0].empirical - exact) < 5.0 * rep.rows[0].std_error);
}

TEST_SUITE_END();
