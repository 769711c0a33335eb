#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "torusheat/gaussian_field.hpp"
#include "torusheat/parallel.hpp"

namespace torusheat {

// Nonlinear heat-equation solver on the circle [-1, 1) with space-time
// white noise:
//
//   du = u_xx dt + b(u) dt + sigma(u) dW,   u(0, .) = u_0,
//
// for an R^p-valued field u. One scheme is provided, "semi-implicit-
// spectral": per step the drift and diffusion coefficients are formed
// pointwise on the grid, the heat semigroup is applied exactly in Fourier
// space, and the noise enters as the exactly integrated stochastic
// convolution increment with the diffusion frozen at the step start,
//
//   u^{m+1} = D(dt) [ u^m + dt b(u^m) ] + sigma(u^m) Xi^m,
//
// where D(dt) multiplies Fourier index k by e^{-pi^2 k^2 dt} and Xi^m is
// the Gaussian field with independent mode amplitudes of variance
// (1 - e^{-2 pi^2 k^2 dt}) / (2 pi^2 k^2) — the exact variance of
// int_0^dt e^{(dt-s) Laplacian} dW per mode. The scheme is unconditionally
// stable (the stiff linear part is exact), drift and diffusion are
// explicit, and with sigma == I, b == 0 the grid law is exact at every
// step for any dt: each mode performs the same Ornstein-Uhlenbeck
// transition as the exact spectral sampler. A plain white increment
// sigma(u) dW inside D(dt) would instead lose the variance of every mode
// with pi^2 k^2 dt >~ 1 and flatten the field's fine-scale structure.
//
// Discrete noise: Xi^m is synthesized on the orthonormal grid basis
// {1/sqrt2, cos(pi n x), sin(pi n x), cos(pi (J/2) x)/sqrt2}. The mode
// amplitudes for coordinate i at step m come from the same (seed, replica,
// coordinate, step)-keyed streams as the exact spectral sampler's
// transitions, so a solver run and a sampler run with matching keys are
// driven by the same Brownian modes.

// Evaluators are plain callables and must be reentrant: ensembles invoke
// them concurrently from worker threads. out is caller-allocated.
using DriftFn = std::function<void(const double* v, double* out)>;      // out[p]
using DiffusionFn = std::function<void(const double* v, double* out)>;  // out[p*p], row-major
using InitialFn = std::function<void(double x, double* out)>;           // out[p]

// Coordinate dimension cap for the fixed-size scratch buffers used inside
// evaluator wrappers (retractions, regularization).
constexpr int kMaxFieldDim = 32;

struct Coefficients {
  int p = 1;
  DriftFn drift;          // null means b == 0
  DiffusionFn diffusion;  // null means sigma == 0
  // Declared Lipschitz constants (drift: Euclidean; diffusion: Frobenius).
  // validate_lipschitz audits them against random difference quotients.
  double lip_drift = 0.0;
  double lip_diffusion = 0.0;
  // Declared boundedness with sup norms (drift: Euclidean; diffusion:
  // operator norm). Consumed by the moment-bound checks.
  bool drift_bounded = false;
  bool diffusion_bounded = false;
  double drift_sup = 0.0;
  double diffusion_sup = 0.0;
};

struct SolverConfig {
  int p = 1;
  int n_sites = 64;  // J: uniform grid x_j = -1 + 2j/J, even, >= 4
  double dt = 1e-3;
  double t_end = 1.0;         // must be an integer number of steps
  InitialFn initial_data;     // null means u_0 == 0
  std::string scheme = "semi-implicit-spectral";
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;  // ensemble index; keys independent noise
  // Number of Fourier noise modes. 0 means J/2 (full: exact white noise).
  // Smaller values drive the equation with spectrally truncated noise.
  int n_modes = 0;
  // Cyclic shift (in grid cells) applied to every synthesized noise array.
  // Translating initial data and noise together translates the solution;
  // tests use this seam to verify that equivariance pathwise.
  int noise_grid_shift = 0;
  // Times at which the field is recorded (snapped to the nearest step).
  // The final time is always recorded.
  std::vector<double> snapshot_times;
  int snapshot_stride = 0;  // additionally record every k-th step (0 = off)
  // Diagnostics. sup_x ||u|| is tracked every step. min_x lambda(sigma(u))
  // is tracked only when track_lambda is set (it costs an eigensolve per
  // site per step). Threshold crossings record first-hit step indices:
  // sup ||u|| >= stop_norm_threshold, min lambda <= stop_lambda_threshold.
  bool track_lambda = false;
  double stop_norm_threshold = 0.0;     // 0 = off
  double stop_lambda_threshold = -1.0;  // negative = off
};

struct Trajectory {
  FieldSample sample;  // recorded snapshots; sites are the full grid
  double dt = 0.0;
  long n_steps = 0;
  std::vector<double> sup_norm;    // per step, size n_steps + 1 (step 0 first)
  std::vector<double> min_lambda;  // per step if tracked and sigma != 0, else empty
  long first_norm_hit = -1;    // earliest step with sup_norm >= threshold
  long first_lambda_hit = -1;  // earliest step with min_lambda <= threshold
  bool blew_up = false;        // non-finite value appeared; run truncated
  long blow_up_step = -1;
};

// Runs the scheme. Non-finite values stop the run: the trajectory keeps the
// snapshots recorded so far and is flagged (blew_up, blow_up_step).
Trajectory solve(const SolverConfig& config, const Coefficients& coeffs);

// Independent replicas r = 0..n-1 (replica key = config.replica + r).
// Serial and parallel policies are bit-identical: replicas share nothing.
std::vector<Trajectory> solve_ensemble(const SolverConfig& config,
                                       const Coefficients& coeffs,
                                       int n_replicas,
                                       exec policy = exec::parallel);

// Grid sites x_j = -1 + 2j/J of the solver.
std::vector<double> solver_grid(int n_sites);

// Single-point variance of the additive solution (b == 0, sigma == I,
// u_0 == 0) in the dt -> 0 limit on a J-site grid: the exact field variance
// restricted to the grid's J Fourier modes (half weight at Nyquist).
double grid_field_variance(double t, int n_sites);

// Radial retraction of the drift: b_N(v) = b(v) for ||v|| <= N, else
// b(N v/||v||). Keeps the declared Lipschitz constant (the retraction is
// 1-Lipschitz) and records a sampled sup norm over the ball ||v|| <= N
// (boundary points are included in the sample, so for radially monotone
// drifts the recorded value is exact).
Coefficients truncate_drift(const Coefficients& coeffs, double N,
                            int n_probe = 4096, std::uint64_t seed = 0x7ba1);

// lambda(v): smallest eigenvalue of sigma(v)^T sigma(v), i.e. the squared
// smallest singular value of sigma(v). This squared convention is used
// throughout (identity -> 1, diag(2,3) -> 4).
double smallest_singular_value(const DiffusionFn& sigma, const double* v,
                               int p);

struct LipschitzReport {
  double max_drift_quotient = 0.0;
  double max_diffusion_quotient = 0.0;  // Frobenius norm
  int n_pairs = 0;
  bool ok = false;  // quotients <= declared * 1.01
};

// Audits the declared Lipschitz constants over random difference quotients.
LipschitzReport validate_lipschitz(const Coefficients& coeffs, int n_pairs,
                                   std::uint64_t seed);

struct SqrtLambdaReport {
  double lip_declared = 0.0;
  double max_quotient = 0.0;  // of |sqrt(lambda(v)) - sqrt(lambda(w))| / ||v - w||
  int n_pairs = 0;
};

// Checks that sqrt(lambda) inherits the diffusion's Lipschitz constant:
// sampled quotients must not exceed lip_declared * (1 + 1e-6). Throws
// ViolationFound otherwise.
SqrtLambdaReport sqrt_lambda_lipschitz_check(const DiffusionFn& sigma, int p,
                                             double lip_declared, int n_pairs,
                                             std::uint64_t seed);

// Directional root-finding probe used to measure the distance to the level
// set boundary {lambda = r}: along each sampled direction, march outward to
// bracket the first crossing, then bisect. The reported distance is exact
// when the nearest boundary point lies along a probed direction (the 2p
// coordinate axes are always included), and an upper bound otherwise.
struct ProbeConfig {
  int n_directions = 32;   // >= 2p: axes first, then random unit vectors
  double max_radius = 8.0; // search range for the bracket march
  int n_march = 96;        // coarse march steps to bracket a crossing
  double tol = 1e-9;       // bisection tolerance on the distance
  std::uint64_t seed = 0x0ddba11;
};

struct RegularizedDiffusion {
  DiffusionFn sigma;  // sigma_{r,N}: see regularize_sigma
  // Distance field d_r used inside sigma (0 where lambda(v) >= r).
  std::function<double(const double* v)> d_r;
  // lambda of the *original* sigma; cheap membership probe for {lambda < r}.
  std::function<double(const double* v)> lambda;
  double r = 0.0;                // degeneracy threshold the field was built for
  bool boundary_empty = false;   // lambda >= r everywhere sampled; d_r == 0
  double inf_lambda_grid = 0.0;  // min of lambda(sigma_{r,N}) on the validation grid
};

// Builds sigma_{r,N}(v) = sigma_r(v) for ||v|| <= N and sigma_r(N v/||v||)
// beyond, where sigma_r(v) = sigma(v) + d_r(v) I and d_r(v) is the probed
// distance from v to the boundary of the degeneracy set {lambda < r}.
// If lambda >= r on the whole sampled region the regularization is a no-op:
// the result is flagged boundary_empty and sigma_{r,N} falls back to the
// plain retraction of sigma. If the degeneracy set has no reachable
// boundary (lambda < r everywhere within probe range), throws EmptyBoundary.
// The result is validated: inf lambda(sigma_{r,N}) over a random grid in
// ||v|| <= N must be positive, else ViolationFound.
RegularizedDiffusion regularize_sigma(const DiffusionFn& sigma, int p,
                                      double r, double N,
                                      const ProbeConfig& probe = {});

struct DrLipschitzReport {
  double max_quotient = 0.0;
  int n_pairs = 0;
  int n_pairs_inside = 0;  // pairs with at least one endpoint in {lambda < r}
};

// Samples difference quotients of the probed distance field d_r within the
// ball ||v|| <= sample_radius. A distance function is 1-Lipschitz; the
// caller asserts max_quotient against 1 plus probe slack.
DrLipschitzReport d_r_lipschitz_check(const RegularizedDiffusion& reg, int p,
                                      double sample_radius, int n_pairs,
                                      std::uint64_t seed);

struct LinearizationReport {
  std::vector<double> times;       // snapped to the step grid
  std::vector<double> mean_error;  // E sup_x ||u - G_t u0 - sigma(u0) H||
  std::vector<double> rms_error;   // (E err^2)^{1/2}
  std::vector<double> k4_error;    // (E err^4)^{1/4}
  double slope_mean = 0.0;  // log-log slope of mean_error vs time
  double slope_k2 = 0.0;
  double slope_k4 = 0.0;
  double max_error = 0.0;  // over replicas and times
  int n_replicas = 0;
};

// Short-time linearization error of the solution around its additive
// approximation: per replica runs the full equation and the additive one
// (sigma == I, b == 0, u_0 == 0) on the same noise realization, and
// measures sup_x ||u(t, x) - (G_t u0)(x) - sigma(u0(x)) H(t, x)|| at each
// requested time, where G_t is the grid heat semigroup and H the additive
// solution. For state-dependent sigma the error shrinks like sqrt(t); for
// constant sigma it collapses to transform round-off (the two runs then
// perform the same arithmetic up to scaling), so slopes are meaningless and
// only the magnitude is of interest.
LinearizationReport linearization_error_scan(const Coefficients& coeffs,
                                             const InitialFn& u0,
                                             const std::vector<double>& t_grid,
                                             int n_replicas, std::uint64_t seed,
                                             const SolverConfig& base,
                                             exec policy = exec::parallel);

struct MomentScanReport {
  std::vector<double> space_sep, space_energy;  // E ||u(t,x) - u(t,x+d)||^2
  std::vector<double> time_sep, time_energy;    // E ||u(t,x) - u(t-s,x)||^2
  double slope_space = 0.0;  // log-log slope vs separation
  double slope_time = 0.0;
  bool degenerate = false;  // an energy vanished; slopes are meaningless
};

// Second-moment increment exponents from a solved ensemble. base_time and
// base_time - s (for each temporal separation s) must be recorded snapshot
// times; spatial separations must be whole numbers of grid cells. Energies
// are averaged over all sites (the law is stationary in x) and replicas.
MomentScanReport increment_moment_scan(const std::vector<Trajectory>& ensemble,
                                       double base_time,
                                       const std::vector<double>& space_seps,
                                       const std::vector<double>& time_seps);

struct BdgReport {
  struct Row {
    int k = 0;
    double empirical = 0.0;  // E ||H(t,x)||^k, MC estimate
    double std_error = 0.0;
    double bound = 0.0;  // (4 k p M(sigma)^2 Var(t))^{k/2}
    bool ok = false;     // empirical <= bound + 3 std_error
  };
  std::vector<Row> rows;
  double variance_used = 0.0;
};

// Even-moment bound for the additive stochastic convolution: for each even
// k, compares the empirical k-th moment of ||H(t, x)|| (p independent
// coordinates, exact spectral sampler) against the closed-form bound
// (4 k p M(sigma)^2 Var(t))^{k/2} with M(sigma) = sigma_sup.
BdgReport bdg_bound_check(int p, double t, double x, int n_replicas,
                          int n_modes, const std::vector<int>& ks,
                          std::uint64_t seed, double sigma_sup = 1.0);

// Named coefficient fixtures (no runtime code loading; configs select by
// name). Drift: "zero"; "linear_decay" b(v) = -v; "saturating"
// b(v) = -v / (1 + ||v||). Diffusion: "zero"; "identity"; "constant"
// sigma = c I (c = diffusion_param); "sin_diag" sigma(v) =
// (1 + a sin v_1) I (a = diffusion_param); "diag_v1" sigma(v) =
// diag(v_1, 1, ..., 1). Declared Lipschitz/sup constants are filled in.
Coefficients make_coefficients(const std::string& drift_name,
                               const std::string& diffusion_name, int p,
                               double diffusion_param = 0.5);

// Named initial data: "zero"; "constant" u_i = a; "cosine" u_i(x) =
// a cos(pi b x) / (1 + i); "weierstrass" a times a lacunary cosine series
// with Hoelder-1/2 regularity, scaled by 1 / (1 + i) per coordinate.
InitialFn make_initial(const std::string& name, int p, double a = 1.0,
                       double b = 1.0);

}  // namespace torusheat
