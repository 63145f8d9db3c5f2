#include "spinchain/observables.hpp"

#include <algorithm>
#include <cmath>

namespace spinchain::observables {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDomainGuard = 1e-9;
// Re-check trigger: |increment| >= pi - 0.3 <=> dot <= cos(pi - 0.3).
const double kFlipBandDot = std::cos(kPi - 0.3);

void require_xy_periodic(const model::SpinChain& chain) {
  if (chain.n_dim() != 2) throw Error(Errc::InvalidDimension, "winding needs N = 2");
  if (chain.bc() != model::BoundaryCondition::Periodic)
    throw Error(Errc::InvalidConfig, "winding needs periodic boundary conditions");
}

// Principal-value angle from spin i to spin j, in (-pi, pi].
double increment_angle(const model::SpinChain& chain, int i, int j) {
  const auto a = chain.spin(i), b = chain.spin(j);
  const double cross = a[0] * b[1] - a[1] * b[0];
  const double d = a[0] * b[0] + a[1] * b[1];
  double ang = std::atan2(cross, d);
  if (ang <= -kPi) ang += 2.0 * kPi;
  return ang;
}
}  // namespace

WindingDomainFlag winding_domain(const model::SpinChain& chain, double guard_band) {
  require_xy_periodic(chain);
  const int L = chain.length();
  for (int i = 0; i < L; ++i) {
    const double ang = increment_angle(chain, i, (i + 1) % L);
    if (kPi - std::abs(ang) < guard_band) return {false, i};
  }
  return {true, std::nullopt};
}

int winding_number(const model::SpinChain& chain) {
  require_xy_periodic(chain);
  const int L = chain.length();
  double sum = 0.0;
  for (int i = 0; i < L; ++i) {
    const double ang = increment_angle(chain, i, (i + 1) % L);
    if (kPi - std::abs(ang) < kDomainGuard)
      throw Error(Errc::OutsideDomain, "increment at site " + std::to_string(i) + " is within 1e-9 of pi");
    sum += ang;
  }
  const double w = sum / (2.0 * kPi);
  const double rounded = std::round(w);
  if (std::abs(w - rounded) > 1e-6)
    throw Error(Errc::OutsideDomain, "winding sum does not round to an integer");
  return static_cast<int>(rounded);
}

BottleneckEvents classify_bottleneck(const model::SpinChain& chain, double delta) {
  require_xy_periodic(chain);
  const int L = chain.length();
  BottleneckEvents ev;
  ev.delta = delta;
  const int w = winding_number(chain);  // propagates OutsideDomain
  ev.in_B = (w == 0);
  bool near_antipodal = false;
  for (int i = 0; i < L; ++i) {
    if (kPi - std::abs(increment_angle(chain, i, (i + 1) % L)) <= delta) {
      near_antipodal = true;
      break;
    }
  }
  ev.in_A_delta = ev.in_B && near_antipodal;
  bool b0 = true, b1 = true;
  for (int i = 0; i < L && (b0 || b1); ++i) {
    const double a = std::atan2(chain.spin(i)[1], chain.spin(i)[0]);
    // reference configurations: constant at angle 0, and the winding-1 circle
    double d0 = a;
    if (d0 > kPi) d0 -= 2.0 * kPi;
    if (d0 < -kPi) d0 += 2.0 * kPi;
    if (std::abs(d0) > delta) b0 = false;
    double d1 = a - 2.0 * kPi * i / L;
    d1 = std::remainder(d1, 2.0 * kPi);
    if (std::abs(d1) > delta) b1 = false;
  }
  ev.in_B0 = b0;
  ev.in_B1 = b1;
  return ev;
}

FlipTimeResult hitting_time_winding_flip(const model::SpinChain& start, double beta,
                                         const dynamics::IntegratorConfig& cfg, Rng& rng,
                                         double max_time) {
  require_xy_periodic(start);
  const int L = start.length();
  const int w0 = winding_number(start);
  FlipTimeResult result;
  result.initial_winding = w0;
  result.final_winding = w0;
  if (max_time <= 0.0) return result;
  model::SpinChain chain = start;
  model::SpinChain scratch = start;
  const long long n_steps = static_cast<long long>(std::ceil(max_time / cfg.dt));
  for (long long step = 1; step <= n_steps; ++step) {
    dynamics::langevin_step_inplace(chain, scratch, beta, cfg.dt, rng, cfg.noise);
    bool in_band = false;
    for (int i = 0; i < L; ++i) {
      const auto a = chain.spin(i), b = chain.spin((i + 1) % L);
      if (a[0] * b[0] + a[1] * b[1] <= kFlipBandDot) {
        in_band = true;
        break;
      }
    }
    if (!in_band) continue;
    int w;
    try {
      w = winding_number(chain);
    } catch (const Error&) {
      continue;  // increment sitting on the cut; resolved next step
    }
    if (w != w0) {
      result.time = static_cast<double>(step) * cfg.dt;
      result.final_winding = w;
      return result;
    }
  }
  return result;
}

double exp_tail_tau(std::span<const double> autocov, double lo, double hi) {
  if (autocov.size() < 3 || autocov[0] <= 0.0)
    throw Error(Errc::DegenerateSeries, "autocovariance too short or degenerate");
  std::vector<double> xs, ys;
  for (size_t lag = 1; lag < autocov.size(); ++lag) {
    const double r = autocov[lag] / autocov[0];
    if (r <= lo) break;
    if (r > hi) continue;
    xs.push_back(static_cast<double>(lag));
    ys.push_back(std::log(r));
  }
  if (xs.size() < 2) throw Error(Errc::SeriesTooShort, "no usable window for the tail fit");
  const auto fit = stats::fit_line(xs, ys);
  if (fit.slope >= 0.0) throw Error(Errc::NotConverged, "autocovariance tail is not decaying");
  return -1.0 / fit.slope;
}

ActEstimate autocorrelation_time(std::span<const double> series, ActMethod method,
                                 uint64_t bootstrap_seed) {
  if (series.size() < 1000) throw Error(Errc::SeriesTooShort, "need at least 1000 points");
  const double mu = stats::mean(series);
  double var = 0.0;
  for (double x : series) var += (x - mu) * (x - mu);
  if (var <= 0.0) return {0.0, {0.0, 0.0}, true};

  const auto estimate = [&](std::span<const double> xs) {
    if (method == ActMethod::IntegratedACT) return stats::integrated_autocorr_time(xs);
    const int max_lag = static_cast<int>(xs.size()) / 4;
    const auto cov = stats::autocovariance(xs, max_lag, stats::mean(xs));
    return exp_tail_tau(cov);
  };
  ActEstimate est;
  est.tau = estimate(series);
  // Block bootstrap over contiguous segments.
  const int n_blocks = 8;
  const size_t bs = series.size() / n_blocks;
  std::vector<double> taus;
  Rng rng(bootstrap_seed);
  for (int b = 0; b < 32; ++b) {
    const size_t off = static_cast<size_t>(rng.next_u64() % (series.size() - bs + 1));
    try {
      taus.push_back(estimate(series.subspan(off, bs)));
    } catch (const Error&) {
    }
  }
  if (taus.size() >= 4) {
    std::sort(taus.begin(), taus.end());
    est.ci = {taus[taus.size() / 20], taus[taus.size() - 1 - taus.size() / 20]};
    est.ci.lo = std::min(est.ci.lo, est.tau);
    est.ci.hi = std::max(est.ci.hi, est.tau);
  } else {
    est.ci = {est.tau, est.tau};
  }
  return est;
}

}  // namespace spinchain::observables
