#include "spinchain/stats.hpp"

#include <algorithm>
#include <cmath>

#include "spinchain/error.hpp"
#include "spinchain/linalg.hpp"

namespace spinchain::stats {

double mean(std::span<const double> xs) {
  return linalg::pairwise_sum(xs.data(), xs.size()) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  const size_t n = xs.size();
  if (n < 2) throw Error(Errc::SeriesTooShort, "variance needs at least two points");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(Errc::SeriesTooShort, "fit needs >= 2 matched points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - intercept - slope * x[i];
    rss += r * r;
  }
  const double se = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  return {slope, intercept, se};
}

std::vector<double> autocovariance(std::span<const double> xs, int max_lag, double mu) {
  const int n = static_cast<int>(xs.size());
  std::vector<double> c(static_cast<size_t>(max_lag) + 1, 0.0);
  for (int lag = 0; lag <= max_lag && lag < n; ++lag) {
    double s = 0.0;
    for (int t = 0; t + lag < n; ++t) s += (xs[t] - mu) * (xs[t + lag] - mu);
    c[static_cast<size_t>(lag)] = s / static_cast<double>(n - lag);
  }
  return c;
}

double batch_means_stderr(std::span<const double> xs, int n_batches) {
  const int n = static_cast<int>(xs.size());
  if (n < 2 * n_batches) n_batches = std::max(2, n / 2);
  const int bs = n / n_batches;
  std::vector<double> bm;
  bm.reserve(static_cast<size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b)
    bm.push_back(mean(xs.subspan(static_cast<size_t>(b) * bs, static_cast<size_t>(bs))));
  return std::sqrt(variance(bm) / static_cast<double>(n_batches));
}

double integrated_autocorr_time(std::span<const double> xs, double window_factor) {
  const int n = static_cast<int>(xs.size());
  if (n < 16) throw Error(Errc::SeriesTooShort, "series too short for tau_int");
  const double mu = mean(xs);
  const auto cov = autocovariance(xs, n / 4, mu);
  if (cov[0] <= 0.0) throw Error(Errc::DegenerateSeries, "zero-variance series");
  double tau = 1.0;
  for (int w = 1; w < static_cast<int>(cov.size()); ++w) {
    tau += 2.0 * cov[static_cast<size_t>(w)] / cov[0];
    if (w >= window_factor * tau) break;
  }
  return std::max(tau, 1e-12);
}

Interval bootstrap_ci(std::span<const double> replica_values, int n_resamples, double level,
                      Rng& rng) {
  const size_t n = replica_values.size();
  std::vector<double> stats;
  stats.reserve(static_cast<size_t>(n_resamples));
  for (int b = 0; b < n_resamples; ++b) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i)
      s += replica_values[static_cast<size_t>(rng.next_u64() % n)];
    stats.push_back(s / static_cast<double>(n));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto pick = [&](double q) {
    const int i = std::clamp(static_cast<int>(q * (n_resamples - 1)), 0, n_resamples - 1);
    return stats[static_cast<size_t>(i)];
  };
  return {pick(alpha), pick(1.0 - alpha)};
}

}  // namespace spinchain::stats
