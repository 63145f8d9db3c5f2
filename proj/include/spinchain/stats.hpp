#pragma once

#include <span>
#include <utility>
#include <vector>

#include "spinchain/rng.hpp"

namespace spinchain::stats {

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // unbiased

struct LinearFit {
  double slope;
  double intercept;
  double slope_stderr;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Autocovariance at lags 0..max_lag about a supplied mean.
std::vector<double> autocovariance(std::span<const double> xs, int max_lag, double mu);

// Standard error of the mean of a correlated series via batch means.
double batch_means_stderr(std::span<const double> xs, int n_batches = 50);

// Integrated autocorrelation time 1 + 2 sum rho(t), with the adaptive
// window cutoff W = min{w : w >= c * tau_int(w)}.
double integrated_autocorr_time(std::span<const double> xs, double window_factor = 5.0);

struct Interval {
  double lo, hi;
};

// Percentile bootstrap over replica-level statistics.
Interval bootstrap_ci(std::span<const double> replica_values, int n_resamples, double level,
                      Rng& rng);

}  // namespace spinchain::stats
