#pragma once

#include <optional>

#include "spinchain/dynamics.hpp"
#include "spinchain/model.hpp"
#include "spinchain/rng.hpp"
#include "spinchain/stats.hpp"

namespace spinchain::observables {

struct WindingDomainFlag {
  bool in_domain = true;
  std::optional<int> offending_site;  // set iff !in_domain
};

// True unless some neighbor increment sits within guard_band of pi.
WindingDomainFlag winding_domain(const model::SpinChain& chain, double guard_band = 1e-9);

// (1/2pi) sum of principal-value angle increments of an N = 2 periodic
// chain; exact integer on its continuity domain. Throws OutsideDomain when
// an increment is within 1e-9 of pi.
int winding_number(const model::SpinChain& chain);

struct BottleneckEvents {
  double delta = 0.0;
  bool in_A_delta = false;  // zero winding with a near-antipodal adjacent pair
  bool in_B = false;        // zero winding
  bool in_B0 = false;       // within delta of the constant configuration, sitewise
  bool in_B1 = false;       // within delta of the winding-one circle, sitewise
};

BottleneckEvents classify_bottleneck(const model::SpinChain& chain, double delta);

struct FlipTimeResult {
  std::optional<double> time;  // absent when max_time was reached first
  int initial_winding = 0;
  int final_winding = 0;
};

// First time the winding number changes from its initial value under the
// Langevin dynamics. Increments are monitored every step through their dot
// products; the winding is re-evaluated whenever an increment enters the
// band [pi - 0.3, pi + 0.3].
FlipTimeResult hitting_time_winding_flip(const model::SpinChain& start, double beta,
                                         const dynamics::IntegratorConfig& cfg, Rng& rng,
                                         double max_time);

enum class ActMethod { IntegratedACT, ExpTailFit };

struct ActEstimate {
  double tau = 0.0;   // in sampling-interval units
  stats::Interval ci{0.0, 0.0};
  bool degenerate = false;
};

// Autocorrelation time of a stationary series; series length >= 1000.
ActEstimate autocorrelation_time(std::span<const double> series, ActMethod method,
                                 uint64_t bootstrap_seed = 7);

// Least-squares exponential-tail fit of an autocovariance curve over the
// window where it falls between hi and lo relative to lag 0.
double exp_tail_tau(std::span<const double> autocov, double lo = 0.15, double hi = 0.75);

}  // namespace spinchain::observables
