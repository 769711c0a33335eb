#pragma once

#include <cstdint>
#include <vector>

#include "torusheat/parallel.hpp"
#include "torusheat/torus.hpp"

namespace torusheat {

// Spectral representation of the additive-noise field
//   H_i(t, x) = A_0 / sqrt(2) + sum_{n=1}^{N} [A_n cos(pi n x) + B_n sin(pi n x)]
// per coordinate i, where each amplitude is an independent
// Ornstein-Uhlenbeck process: Var A_0(t) = t and
// Var A_n(t) = Var B_n(t) = (1 - e^{-2 pi^2 n^2 t}) / (2 pi^2 n^2).
// The basis {1/sqrt2, cos(pi n x), sin(pi n x)} is orthonormal in
// L2([-1,1), dx), so this is the exact law of the truncated field at every
// (t, x), for any evolve() step sequence.
struct SpectralState {
  double t = 0.0;
  int n_modes = 0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  long step = 0;  // number of evolve calls taken (keys the noise streams)
  // [coordinate][mode]; sine_coeffs[i][0] is identically zero (no sine mode
  // at n = 0), kept so both arrays index modes the same way.
  std::vector<std::vector<double>> cosine_coeffs;
  std::vector<std::vector<double>> sine_coeffs;

  int dim() const { return static_cast<int>(cosine_coeffs.size()); }
};

// Mode count that resolves the diffusive variance regime down to time
// t_min: max(64, ceil(8 / sqrt(t_min))). The neglected tail variance is at
// most 1/(2 pi^2 N).
int default_n_modes(double t_min);

// Zero field at t = 0. (seed, replica) keys all noise drawn later.
SpectralState make_state(int p, int n_modes, std::uint64_t seed,
                         std::uint64_t replica);

// Exact transition over dt > 0:
//   A_n <- e^{-pi^2 n^2 dt} A_n + N(0, (1 - e^{-2 pi^2 n^2 dt})/(2 pi^2 n^2))
//   A_0 <- A_0 + N(0, dt)
// and the same law for the sine amplitudes, all independent. Exact in law
// regardless of step size or how an interval is split into steps.
void evolve(SpectralState& state, double dt);

// Same transition applied to the cosine amplitudes only, consuming the
// identical random stream as the cosine half of evolve(). Because
// A_n cos(pi n x0) + B_n sin(pi n x0) has the same joint law in t as a
// single amplitude at x0 = 0, the trace t -> H(t, 0) of this reduced state
// has the exact single-site law at a fraction of the cost. Only render at
// x = 0 (or cosine-even statistics) is meaningful afterwards.
void evolve_cos_only(SpectralState& state, double dt);

// All p coordinates at one site.
std::vector<double> eval_at(const SpectralState& state, double x);

// Values at arbitrary sites, row-major out[site * p + i]. Serial and
// parallel policies are bit-identical (per-site work is independent).
std::vector<double> render(const SpectralState& state,
                           const std::vector<double>& sites,
                           exec policy = exec::parallel);

// Values on the uniform grid x_j = -1 + 2j/J via one real FFT per
// coordinate; layout matches render() on those sites. Requires J even and
// J >= 2 n_modes + 2 so every mode is below the Nyquist frequency.
std::vector<double> render_uniform_fft(const SpectralState& state,
                                       int grid_size);
// Single-coordinate variant writing into out[0..grid_size).
void render_uniform_fft_coord(const SpectralState& state, int coord,
                              int grid_size, double* out);

struct FieldSample {
  std::vector<double> times;  // sorted ascending, >= 0
  std::vector<double> sites;  // sorted ascending, canonical in [-1, 1)
  int p = 0;
  int n_modes = 0;
  std::uint64_t seed = 0;
  // values[(k * n_sites + j) * p + i]: time k, site j, coordinate i
  std::vector<double> values;
};

// Joint sample of the truncated field on a time x site grid; exact in law,
// deterministic given seed.
FieldSample sample_grid(const std::vector<double>& times,
                        const std::vector<double>& sites, int p, int n_modes,
                        std::uint64_t seed, exec policy = exec::parallel);

struct ConditioningProblem {
  SpaceTimePoint target;
  std::vector<SpaceTimePoint> conditioners;
};

// Var(H_1(target) | H_1 at the conditioners), computed as
// Var - c^T Sigma^+ c with eigenvalue clipping at 1e-12 * trace for the
// pseudo-inverse. n_modes > 0 uses the n-mode-truncated covariance (the law
// actually sampled by SpectralState); n_modes <= 0 uses the full closed
// form. Conditioners are sorted internally, so the result is exactly
// permutation invariant. *degenerate reports whether any eigenvalue was
// clipped. Throws DuplicatePoints when two conditioners coincide.
double conditional_variance(const ConditioningProblem& problem,
                            int n_modes = 0, bool* degenerate = nullptr);

struct SlndConfigResult {
  SpaceTimePoint target;
  int m = 0;              // number of conditioners
  double cond_var = 0.0;  // Var(H_1(target) | conditioners)
  double denom = 0.0;     // min(sqrt t, min_j(|t-t_j|^{1/2} + dist(x,x_j)))
  double ratio = 0.0;
  bool skipped = false;   // conditioner coincided with the target
};

struct SlndReport {
  std::vector<SlndConfigResult> configs;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  int n_skipped = 0;
};

// Random local-nondeterminism scan: draws configurations with t in
// [T/10, T], x uniform on the torus and m in {0..m_max} conditioners from
// the same box, then reports the ratio of the conditional variance to the
// local scale min(sqrt t, min_j(|t-t_j|^{1/2} + dist(x, x_j))).
SlndReport slnd_ratio_scan(double T, int m_max, int n_configs,
                           std::uint64_t seed, int n_modes = 0);

struct SmallBallReport {
  double eps = 0.0;
  double bound = 0.0;        // prod_i 2 eps / sqrt(2 pi cond_var_i)
  double mc_estimate = 0.0;  // P(max_i |H_1(s_i)| <= eps)
  double mc_stderr = 0.0;
  long n_mc = 0;
  bool consistent = false;  // mc_estimate <= bound + 3 stderr
  bool degenerate = false;  // some conditional variance was clipped
  std::vector<double> cond_vars;
};

// Successive-conditioning product bound against a Monte Carlo estimate of
// the small-ball probability. Points should already be in greedy order
// (each point nearest to its predecessor) for the bound to be meaningful;
// the check itself is valid for any ordering.
SmallBallReport small_ball_product_check(
    const std::vector<SpaceTimePoint>& points, double eps, long n_mc,
    std::uint64_t seed);

}  // namespace torusheat
