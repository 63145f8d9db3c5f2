#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spinchain/model.hpp"
#include "spinchain/rng.hpp"

namespace spinchain::dynamics {

enum class Scheme { ProjectedEulerMaruyama };

// Generator: per-site diffusion coefficient 1/beta, noise sqrt(2 dt / beta).
// Eq1 is the alternative convention with noise sqrt(2 dt) / beta.
enum class NoiseConvention { Generator, Eq1 };

struct IntegratorConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::ProjectedEulerMaruyama;
  int record_stride = 1;
  NoiseConvention noise = NoiseConvention::Generator;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // one per name, indexed like times
};

using Observable = std::function<double(const model::SpinChain&)>;
using NamedObservable = std::pair<std::string, Observable>;
// Invoked after every integrator step; return false to stop the run.
using StepCallback = std::function<bool(const model::SpinChain&, double)>;

// One synchronous projected Euler-Maruyama step:
// S_i <- retract(S_i - D_i H dt + amp * xi_i), xi_i an isotropic standard
// Gaussian projected to the tangent space at S_i. Throws StepTooLarge when
// dt * max_i ||D_i H|| >= 0.5.
model::SpinChain langevin_step(const model::SpinChain& chain, double beta, double dt, Rng& rng,
                               NoiseConvention noise = NoiseConvention::Generator);

// In-place variant used by the drivers; `next` is scratch of equal shape.
void langevin_step_inplace(model::SpinChain& chain, model::SpinChain& next, double beta,
                           double dt, Rng& rng, NoiseConvention noise);

struct SimulationResult {
  TrajectoryRecord record;
  model::SpinChain final_chain;
};

SimulationResult simulate(const model::SpinChain& start, double beta, const IntegratorConfig& cfg,
                          double total_time, const std::vector<NamedObservable>& observers,
                          Rng& rng, const StepCallback& on_step = {});

// Noise-free descent with backtracking: dt halves whenever a step fails to
// decrease the energy by at least 0.5 * dt * ||DH||^2 (checked only while
// ||DH||^2 > 1e-8). Stops early once ||DH|| <= grad_tol (if positive).
model::SpinChain gradient_flow(const model::SpinChain& start, double total_time, double dt,
                               double grad_tol = 0.0);

struct ComTrace {
  std::vector<double> times;
  std::vector<double> xbar;       // center of mass of the lifted angles
  model::SpinChain final_chain;
};

// N = 2 only. Runs the dynamics, lifting each site angle continuously
// (per-step increments unwrapped to (-pi, pi)); a step crossing pi, or a
// periodic chain leaving the zero-winding sector, aborts with WindingNotZero.
ComTrace center_of_mass_trace(const model::SpinChain& start, double beta,
                              const IntegratorConfig& cfg, double total_time, Rng& rng);

}  // namespace spinchain::dynamics
