#pragma once

#include <optional>
#include <vector>

#include "spinchain/model.hpp"
#include "spinchain/rng.hpp"
#include "spinchain/vec.hpp"

namespace spinchain::sampling {

// Angles theta_1..theta_L plus, for N >= 3, unit axes v_1..v_L orthogonal
// to e1. Spin i is the composed rotation R_1...R_i applied to e1; for N = 2
// the axes are absent and spin i has angle theta_1 + ... + theta_i.
struct IncrementCoordinates {
  int n_dim = 2;
  std::vector<double> thetas;
  std::vector<Vec> axes;  // empty when n_dim == 2
};

struct WeightedSample {
  model::SpinChain chain;
  double log_weight = 0.0;
};

enum class PeriodicMethod { Reweight, MCMC };

struct RejectionStats {
  long long proposals = 0;
  long long accepts = 0;
  double acceptance() const { return proposals > 0 ? static_cast<double>(accepts) / proposals : 0.0; }
};

// Exact draw from the density proportional to sin(theta)^a e^{b cos(theta)}
// on [0, pi]. Requires a, b >= 0.
double sample_theta(double a, double b, Rng& rng, RejectionStats* stats = nullptr);

// Exact draw from the density proportional to e^{b cos(theta)} on (-pi, pi].
double sample_circle_angle(double b, Rng& rng, RejectionStats* stats = nullptr);

Vec uniform_sphere(int n_dim, Rng& rng);
// Uniform on {x : x . e1 = 0, ||x|| = 1}; requires n_dim >= 3.
Vec uniform_equatorial(int n_dim, Rng& rng);

IncrementCoordinates sample_increment_coords(int n_dim, int length, double beta, Rng& rng);
model::SpinChain coords_to_spins(const IncrementCoordinates& coords);

// Exact draw from the free-boundary Gibbs measure at inverse temperature
// beta (beta >= 0); the per-bond laws factorize in increment coordinates.
model::SpinChain sample_free_gibbs(int n_dim, int length, double beta, Rng& rng);

struct PeriodicOptions {
  int mcmc_burn_in_sweeps = 200;
};

// Reweight: a free-measure draw retagged periodic, carrying
// log_weight = beta * (S_L . S_1). MCMC: heat-bath sweeps targeting the
// periodic measure, log_weight = 0.
WeightedSample sample_periodic_gibbs(int n_dim, int length, double beta, Rng& rng,
                                     PeriodicMethod method, const PeriodicOptions& opts = {});

// One systematic heat-bath sweep of the periodic chain.
void heat_bath_sweep(model::SpinChain& chain, double beta, Rng& rng);

struct WeightedBatch {
  std::vector<WeightedSample> samples;
  double ess = 0.0;                // effective sample size (sum w)^2 / sum w^2
  bool ess_too_low = false;        // ESS / n < 0.01
};
WeightedBatch sample_periodic_batch(int n_dim, int length, double beta, int n, Rng& rng,
                                    PeriodicMethod method, const PeriodicOptions& opts = {});

struct DerivativeBoundsReport {
  double max_theta_norm = 0.0;     // sup over draws and (i, j) of ||dS_i/dtheta_j||
  double max_axis_norm = 0.0;      // sup of the operator norm of dS_i/dv_j
  int n_draws = 0;
  bool theta_violation = false;    // beyond 1 + 1e-4
  bool axis_violation = false;     // beyond 4 + 1e-4
};

// Finite-difference check of the coordinate derivative bounds
// ||dS_i/dtheta_j|| <= 1 and ||dS_i/dv_j|| <= 4 on random coordinates.
// Requires n_dim >= 3.
DerivativeBoundsReport verify_coordinate_derivative_bounds(int n_dim, int length, Rng& rng,
                                                           int n_draws = 1000,
                                                           double fd_step = 1e-5);

}  // namespace spinchain::sampling
