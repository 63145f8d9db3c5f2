#include "spinchain/dynamics.hpp"

#include <cmath>

#include "spinchain/observables.hpp"

namespace spinchain::dynamics {

namespace {
constexpr double kPi = 3.14159265358979323846;

double noise_amplitude(double beta, double dt, NoiseConvention noise) {
  if (beta <= 0.0) throw Error(Errc::InvalidConfig, "langevin dynamics needs beta > 0");
  return noise == NoiseConvention::Generator ? std::sqrt(2.0 * dt / beta)
                                             : std::sqrt(2.0 * dt) / beta;
}
}  // namespace

void langevin_step_inplace(model::SpinChain& chain, model::SpinChain& next, double beta,
                           double dt, Rng& rng, NoiseConvention noise) {
  const int L = chain.length(), n = chain.n_dim();
  const double amp = noise_amplitude(beta, dt, noise);
  double max_grad_sq = 0.0;
  for (int i = 0; i < L; ++i) {
    const auto si = chain.spin(i);
    double m[kMaxDim] = {};
    const int l = chain.left(i), r = chain.right(i);
    if (l >= 0) {
      const auto sl = chain.spin(l);
      for (int k = 0; k < n; ++k) m[k] += sl[k];
    }
    if (r >= 0) {
      const auto sr = chain.spin(r);
      for (int k = 0; k < n; ++k) m[k] += sr[k];
    }
    double msi = 0.0;
    for (int k = 0; k < n; ++k) msi += m[k] * si[k];
    // drift = -D_i H = m - (m . S_i) S_i
    double drift[kMaxDim], gsq = 0.0;
    for (int k = 0; k < n; ++k) {
      drift[k] = m[k] - msi * si[k];
      gsq += drift[k] * drift[k];
    }
    max_grad_sq = std::max(max_grad_sq, gsq);
    double xi[kMaxDim], xs = 0.0;
    for (int k = 0; k < n; ++k) {
      xi[k] = rng.gaussian();
      xs += xi[k] * si[k];
    }
    double y[kMaxDim], ysq = 0.0;
    for (int k = 0; k < n; ++k) {
      y[k] = si[k] + drift[k] * dt + amp * (xi[k] - xs * si[k]);
      ysq += y[k] * y[k];
    }
    const double inv = 1.0 / std::sqrt(ysq);
    auto out = next.spin(i);
    for (int k = 0; k < n; ++k) out[k] = y[k] * inv;
  }
  if (dt * std::sqrt(max_grad_sq) >= 0.5)
    throw Error(Errc::StepTooLarge, "dt * max gradient norm >= 0.5");
  chain.raw().swap(next.raw());
}

model::SpinChain langevin_step(const model::SpinChain& chain, double beta, double dt, Rng& rng,
                               NoiseConvention noise) {
  model::SpinChain cur = chain;
  model::SpinChain scratch = chain;
  langevin_step_inplace(cur, scratch, beta, dt, rng, noise);
  return cur;
}

SimulationResult simulate(const model::SpinChain& start, double beta, const IntegratorConfig& cfg,
                          double total_time, const std::vector<NamedObservable>& observers,
                          Rng& rng, const StepCallback& on_step) {
  if (cfg.dt <= 0.0 || cfg.record_stride < 1)
    throw Error(Errc::InvalidConfig, "dt must be > 0 and record_stride >= 1");
  model::SpinChain chain = start;
  model::SpinChain scratch = start;
  TrajectoryRecord rec;
  for (const auto& [name, fn] : observers) {
    rec.names.push_back(name);
    rec.columns.emplace_back();
  }
  const auto record = [&](double t) {
    rec.times.push_back(t);
    for (size_t c = 0; c < observers.size(); ++c)
      rec.columns[c].push_back(observers[c].second(chain));
  };
  record(0.0);
  const long long n_steps = static_cast<long long>(std::floor(total_time / cfg.dt + 0.5));
  for (long long step = 1; step <= n_steps; ++step) {
    langevin_step_inplace(chain, scratch, beta, cfg.dt, rng, cfg.noise);
    const double t = static_cast<double>(step) * cfg.dt;
    if (on_step && !on_step(chain, t)) {
      record(t);
      return {std::move(rec), std::move(chain)};
    }
    if (step % cfg.record_stride == 0) record(t);
  }
  return {std::move(rec), std::move(chain)};
}

model::SpinChain gradient_flow(const model::SpinChain& start, double total_time, double dt,
                               double grad_tol) {
  if (dt > 1e-2) throw Error(Errc::InvalidConfig, "gradient flow requires dt <= 1e-2");
  model::SpinChain chain = start;
  const int L = chain.length(), n = chain.n_dim();
  double t = 0.0, step = dt;
  double e_cur = model::energy(chain);
  std::vector<double> drift(static_cast<size_t>(L) * n);
  while (t < total_time) {
    double gsq = 0.0;
    for (int i = 0; i < L; ++i) {
      const auto si = chain.spin(i);
      double m[kMaxDim] = {};
      const int l = chain.left(i), r = chain.right(i);
      if (l >= 0) {
        const auto sl = chain.spin(l);
        for (int k = 0; k < n; ++k) m[k] += sl[k];
      }
      if (r >= 0) {
        const auto sr = chain.spin(r);
        for (int k = 0; k < n; ++k) m[k] += sr[k];
      }
      double msi = 0.0;
      for (int k = 0; k < n; ++k) msi += m[k] * si[k];
      for (int k = 0; k < n; ++k) {
        const double d = m[k] - msi * si[k];
        drift[static_cast<size_t>(i) * n + k] = d;
        gsq += d * d;
      }
    }
    if (grad_tol > 0.0 && gsq <= grad_tol * grad_tol) break;
    // Backtracking: accept a step only if it decreases the energy enough.
    for (;;) {
      model::SpinChain trial = chain;
      for (int i = 0; i < L; ++i) {
        auto s = trial.spin(i);
        double y[kMaxDim], ysq = 0.0;
        for (int k = 0; k < n; ++k) {
          y[k] = s[k] + step * drift[static_cast<size_t>(i) * n + k];
          ysq += y[k] * y[k];
        }
        const double inv = 1.0 / std::sqrt(ysq);
        for (int k = 0; k < n; ++k) s[k] = y[k] * inv;
      }
      const double e_new = model::energy(trial);
      const bool needs_decrease = gsq > 1e-8;
      const double required = needs_decrease ? 0.5 * step * gsq : -1e-12;
      if (e_cur - e_new >= required) {
        chain = std::move(trial);
        e_cur = e_new;
        t += step;
        if (step < dt) step = std::min(dt, step * 2.0);
        break;
      }
      step *= 0.5;
      if (step < 1e-12 * dt) {
        // No descent direction at working precision.
        return chain;
      }
    }
  }
  return chain;
}

ComTrace center_of_mass_trace(const model::SpinChain& start, double beta,
                              const IntegratorConfig& cfg, double total_time, Rng& rng) {
  if (start.n_dim() != 2) throw Error(Errc::InvalidDimension, "center-of-mass lift needs N = 2");
  const int L = start.length();
  if (start.bc() == model::BoundaryCondition::Periodic &&
      observables::winding_number(start) != 0)
    throw Error(Errc::WindingNotZero, "lift undefined off the zero-winding sector");
  std::vector<double> lifted(static_cast<size_t>(L));
  std::vector<double> prev(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    lifted[static_cast<size_t>(i)] = std::atan2(start.spin(i)[1], start.spin(i)[0]);
    prev[static_cast<size_t>(i)] = lifted[static_cast<size_t>(i)];
  }
  std::vector<double> times, xbars;
  const auto xbar = [&] {
    double s = 0.0;
    for (double x : lifted) s += x;
    return s / L;
  };
  times.push_back(0.0);
  xbars.push_back(xbar());
  model::SpinChain chain = start;
  model::SpinChain scratch = start;
  const long long n_steps = static_cast<long long>(std::floor(total_time / cfg.dt + 0.5));
  long long check_winding_countdown = 0;
  for (long long step = 1; step <= n_steps; ++step) {
    langevin_step_inplace(chain, scratch, beta, cfg.dt, rng, cfg.noise);
    bool near_cut = false;
    for (int i = 0; i < L; ++i) {
      const double a = std::atan2(chain.spin(i)[1], chain.spin(i)[0]);
      double d = a - prev[static_cast<size_t>(i)];
      if (d > kPi) d -= 2.0 * kPi;
      if (d < -kPi) d += 2.0 * kPi;
      if (std::abs(std::abs(d) - kPi) < 1e-9)
        throw Error(Errc::WindingNotZero, "site angle moved by pi in one step; lift undefined");
      if (std::abs(d) > 2.5) near_cut = true;
      lifted[static_cast<size_t>(i)] += d;
      prev[static_cast<size_t>(i)] = a;
    }
    if (chain.bc() == model::BoundaryCondition::Periodic && (near_cut || --check_winding_countdown <= 0)) {
      if (observables::winding_number(chain) != 0)
        throw Error(Errc::WindingNotZero, "chain left the zero-winding sector");
      check_winding_countdown = 64;
    }
    if (step % cfg.record_stride == 0) {
      times.push_back(static_cast<double>(step) * cfg.dt);
      xbars.push_back(xbar());
    }
  }
  return {std::move(times), std::move(xbars), std::move(chain)};
}

}  // namespace spinchain::dynamics
