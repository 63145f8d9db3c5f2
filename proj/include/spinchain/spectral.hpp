#pragma once

#include <functional>
#include <span>
#include <vector>

#include "spinchain/model.hpp"
#include "spinchain/rng.hpp"
#include "spinchain/sampling.hpp"
#include "spinchain/stats.hpp"
#include "spinchain/vec.hpp"

namespace spinchain::spectral {

enum class GapMethod { Autocorr, Rayleigh, OracleMatrix };

const char* gap_method_name(GapMethod m);

struct GapEstimate {
  double value = 0.0;  // inverse time units; for beta == 0 the beta-scaled gap
  GapMethod method = GapMethod::Autocorr;
  stats::Interval ci{0.0, 0.0};
  int n_dim = 2;
  int length = 0;
  double beta = 0.0;
  model::BoundaryCondition bc = model::BoundaryCondition::Free;
};

// Closed-form Poincare constants for the increment measures.
// c1: density sin^a e^{b cos} on [0, pi]; c2: uniform sphere S^{N-1};
// c3: density e^{b cos} on the circle. Integrals by adaptive quadrature
// to relative error 1e-10.
double poincare_c1(double a, double b);
double poincare_c2(int n_dim);
double poincare_c3(double b);

// Trigonometric polynomial a0 + sum_k (ac_k cos k t + bs_k sin k t).
struct TrigPoly {
  double a0 = 0.0;
  std::vector<double> ac, bs;
  double value(double t) const;
  double deriv(double t) const;
  static TrigPoly random(int degree, Rng& rng);
};

struct PoincareReport {
  double constant = 0.0;
  double max_ratio = 0.0;  // max over test functions of Var(f) / E|f'|^2
  int n_tested = 0;
  int n_skipped = 0;  // degenerate (near-zero Dirichlet form)
  bool pass = false;
};

// Quadrature check of Var(f) <= c1(a, b) E|f'|^2 under sin^a e^{b cos}.
PoincareReport verify_poincare_interval(double a, double b, std::span<const TrigPoly> fs,
                                        double rel_tol = 1e-8);
// Same for the circle measure e^{b cos} against c3(b); fs are 2pi-periodic.
PoincareReport verify_poincare_circle(double b, std::span<const TrigPoly> fs,
                                      double rel_tol = 1e-8);
// Monte-Carlo check of Var(f) <= c2(N) E||grad f||^2 on the uniform sphere
// for linear and quadratic test functions, with 3-sigma slack.
PoincareReport verify_poincare_sphere(int n_dim, int n_funcs, int n_samples, Rng& rng);

struct TensorizedCheck {
  double max_ratio = 0.0;
  int n_tested = 0;
  bool pass = false;
};
// Product-measure bound on [0, pi] x S^{N-2} for f = g1(theta) + g2(theta) u.v:
// Var(f) <= c_eq * E||d_v f||^2 + c1(N-2, beta) * E|d_theta f|^2, where c_eq
// is the equatorial-sphere constant 1/(N-2).
TensorizedCheck verify_tensorized_bound(int n_dim, double beta, int n_funcs, Rng& rng);

// Brute-force spectral gap of the reversible nearest-neighbor Metropolis
// discretization of the N = 2 Langevin diffusion on an M-point angle grid
// per site, Richardson-extrapolated over the M and M/2 grids. State count
// M^L is capped at 2e6 (StateSpaceTooLarge beyond).
GapEstimate gap_oracle_xy(int length, double beta, int grid_size,
                          model::BoundaryCondition bc = model::BoundaryCondition::Periodic);

// Single-grid (no extrapolation) variant; exposed for convergence studies.
double gap_oracle_xy_single(int length, double beta, int grid_size, model::BoundaryCondition bc);

// Expectation of S_1 . S_2 under the discrete Gibbs weights of the oracle
// grid; the stationary law of the discretized generator.
double xy_gibbs_expectation_s1s2(int length, double beta, int grid_size,
                                 model::BoundaryCondition bc);

// Slowest-exponential fit of the pooled autocovariance of replica series
// recorded at interval dt_record. Requires >= 20 replicas. Throws
// NotConverged when fits over replica halves disagree beyond 2 sigma.
GapEstimate gap_estimate_autocorr(const std::vector<std::vector<double>>& replica_series,
                                  double dt_record, int n_dim, int length, double beta,
                                  model::BoundaryCondition bc, uint64_t bootstrap_seed = 11);

// Observable with evaluable sphere gradients, for Rayleigh quotients.
struct SmoothObservable {
  std::function<double(const model::SpinChain&)> value;
  // gradient of the observable at site i (tangential)
  std::function<Vec(const model::SpinChain&, int)> site_grad;
};

struct RayleighBound {
  double bound = 0.0;  // upper bound on the gap (lower bound on T_rel)
  double stderr_est = 0.0;
};
// Monte-Carlo (1/beta) sum_i E||D_i f||^2 / Var(f) over weighted samples;
// for beta == 0 the beta-scaled quotient is returned.
RayleighBound rayleigh_upper_bound_gap(const SmoothObservable& f,
                                       std::span<const sampling::WeightedSample> samples,
                                       double beta);

// The explicit slow test function used for bottleneck Rayleigh quotients:
// product over bonds of a C-infinity ramp in the distance of the increment
// from pi (0 inside delta/2, 1 beyond delta), times the winding-zero
// indicator. N = 2 periodic only.
SmoothObservable bottleneck_observable(double delta);

struct BottleneckRatioResult {
  double delta = 0.0;
  // self-normalized probability estimates
  double p_A = 0.0, p_B_minus_A = 0.0, p_Bc = 0.0, p_B0 = 0.0, p_B1 = 0.0;
  long long hits_A = 0, hits_B0 = 0, hits_B1 = 0;
  double ratio = 0.0;      // p_A / (p_B_minus_A * p_Bc)
  bool censored = false;   // fewer than 10 hits on A_delta
  double ratio_upper = 0.0;  // Poisson upper bound when censored
  stats::Interval ci{0.0, 0.0};
};

BottleneckRatioResult bottleneck_ratio(std::span<const sampling::WeightedSample> samples,
                                       double delta, uint64_t bootstrap_seed = 13);

}  // namespace spinchain::spectral
