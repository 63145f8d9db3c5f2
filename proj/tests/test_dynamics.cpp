#include <doctest.h>

#include <cmath>

#include "spinchain/dynamics.hpp"
#include "spinchain/observables.hpp"
#include "spinchain/paths.hpp"
#include "spinchain/quadrature.hpp"
#include "spinchain/sampling.hpp"
#include "spinchain/stats.hpp"

using namespace spinchain;
namespace dyn = spinchain::dynamics;
namespace smp = spinchain::sampling;

namespace {
constexpr double kPi = 3.14159265358979323846;

model::SpinChain random_chain(int n, int L, model::BoundaryCondition bc, Rng& rng) {
  model::SpinChain c(n, L, bc);
  for (int i = 0; i < L; ++i) c.set_spin(i, smp::uniform_sphere(n, rng));
  return c;
}

double theta_moment(double a, double b) {
  const auto w = [a, b](double t) { return std::pow(std::sin(t), a) * std::exp(b * std::cos(t)); };
  const double z = quadrature::integrate(w, 0.0, kPi, 1e-12).value;
  return quadrature::integrate([&](double t) { return std::cos(t) * w(t); }, 0.0, kPi, 1e-12)
             .value / z;
}
}  // namespace

TEST_CASE("gradient descent leaves the aligned chain fixed") {
  const auto aligned = model::SpinChain::aligned(3, 8, model::BoundaryCondition::Periodic);
  const auto flowed = dyn::gradient_flow(aligned, 1.0, 1e-2);
  for (size_t k = 0; k < aligned.raw().size(); ++k)
    CHECK(flowed.raw()[k] == doctest::Approx(aligned.raw()[k]).epsilon(1e-14));
}

TEST_CASE("single drift-only step decreases the energy") {
  Rng rng(31, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_chain(3, 8, model::BoundaryCondition::Periodic, rng);
    const auto moved = dyn::gradient_flow(c, 1e-3, 1e-3);
    CHECK(model::energy(moved) <= model::energy(c) + 1e-12);
  }
}

TEST_CASE("langevin step guards against oversized steps") {
  Rng rng(32, 0);
  // alternating angles: both neighbors pull sideways, |grad| = 2 sin(3pi/4)
  model::SpinChain c(2, 4, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 4; ++i) {
    const double a = (i % 2 == 0) ? 0.0 : 0.75 * kPi;
    c.set_spin(i, Vec{std::cos(a), std::sin(a)});
  }
  CHECK_THROWS_AS(dyn::langevin_step(c, 1.0, 0.4, rng), Error);
  CHECK_NOTHROW(dyn::langevin_step(c, 1.0, 1e-3, rng));
}

TEST_CASE("norms stay unit over a million steps") {
  Rng rng(33, 0);
  model::SpinChain c = random_chain(2, 8, model::BoundaryCondition::Periodic, rng);
  model::SpinChain scratch = c;
  for (int step = 0; step < 1000000; ++step)
    dyn::langevin_step_inplace(c, scratch, 2.0, 1e-3, rng, dyn::NoiseConvention::Generator);
  CHECK(c.max_unit_violation() < 1e-12);
}

TEST_CASE("long-run bond statistics match the exact sampler") {
  // stationarity proxy: time average of S_1 . S_2 against the free-measure
  // quadrature value, with batch-means error bars
  for (int n_dim : {2, 3}) {
    Rng rng(34, static_cast<uint64_t>(n_dim));
    const double beta = 2.0;
    const int L = 8;
    const auto start = smp::sample_free_gibbs(n_dim, L, beta, rng);
    dyn::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.record_stride = 20;
    const auto result = dyn::simulate(
        start, beta, cfg, 2000.0,
        {{"s1s2", [](const model::SpinChain& c) { return dot(c.spin(0), c.spin(1)); }}}, rng);
    const auto& xs = result.record.columns[0];
    const std::span<const double> tail(xs.data() + xs.size() / 10, xs.size() - xs.size() / 10);
    const double mean = stats::mean(tail);
    const double se = stats::batch_means_stderr(tail);
    const double expected = theta_moment(n_dim - 2.0, beta);
    CHECK(std::abs(mean - expected) < 3.0 * se + 2e-3);
  }
}

TEST_CASE("halving dt leaves the stationary energy within noise") {
  const double beta = 2.0;
  const int L = 8;
  const auto run_mean_energy = [&](double dt, uint64_t stream) {
    Rng rng(35, stream);
    const auto start = smp::sample_free_gibbs(2, L, beta, rng);
    dyn::IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.record_stride = 50;
    const auto result = dyn::simulate(
        start, beta, cfg, 1500.0,
        {{"energy", [](const model::SpinChain& c) { return model::energy(c); }}}, rng);
    const auto& xs = result.record.columns[0];
    const std::span<const double> tail(xs.data() + xs.size() / 10, xs.size() - xs.size() / 10);
    return std::pair(stats::mean(tail), stats::batch_means_stderr(tail));
  };
  const auto [m1, s1] = run_mean_energy(1e-3, 0);
  const auto [m2, s2] = run_mean_energy(5e-4, 1);
  CHECK(std::abs(m1 - m2) < 3.0 * std::sqrt(s1 * s1 + s2 * s2) + 5e-3);
}

TEST_CASE("simulate records with the requested stride") {
  Rng rng(36, 0);
  const auto start = model::SpinChain::aligned(2, 4, model::BoundaryCondition::Free);
  dyn::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.record_stride = 10;
  const auto obs = std::vector<dyn::NamedObservable>{
      {"energy", [](const model::SpinChain& c) { return model::energy(c); }}};
  Rng rng2(36, 0);
  const auto zero = dyn::simulate(start, 1.0, cfg, 0.0, obs, rng2);
  CHECK(zero.record.times.size() == 1);
  CHECK(zero.record.times[0] == 0.0);

  const auto a = dyn::simulate(start, 1.0, cfg, 1.0, obs, rng);
  cfg.record_stride = 20;
  Rng rng3(36, 1);
  const auto b = dyn::simulate(start, 1.0, cfg, 1.0, obs, rng3);
  const auto la = static_cast<long>(a.record.times.size());
  const auto lb = static_cast<long>(b.record.times.size());
  CHECK(std::abs(2 * (lb - 1) - (la - 1)) <= 1);
}

TEST_CASE("winding is integer-valued and changes only by jumps") {
  Rng rng(37, 0);
  const auto start = model::SpinChain::ring(8, 1, model::BoundaryCondition::Periodic);
  dyn::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.record_stride = 5;
  int last = 1;
  std::vector<int> seen;
  const auto result = dyn::simulate(
      start, 4.0, cfg, 20.0,
      {{"winding",
        [&last](const model::SpinChain& c) {
          try {
            last = observables::winding_number(c);
          } catch (const Error&) {
          }
          return static_cast<double>(last);
        }}},
      rng);
  for (double w : result.record.columns[0]) {
    CHECK(w == std::round(w));
    seen.push_back(static_cast<int>(w));
  }
  for (size_t k = 1; k < seen.size(); ++k) CHECK(std::abs(seen[k] - seen[k - 1]) <= 1);
  CHECK(seen.front() == 1);
}

TEST_CASE("gradient flow reaches coplanar configurations") {
  Rng rng(38, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = random_chain(3, 8, model::BoundaryCondition::Periodic, rng);
    const auto flowed = dyn::gradient_flow(c, 1000.0, 1e-2);
    CHECK(model::energy(flowed) <= model::energy(c) + 1e-12);
    CHECK(paths::coplanarity_residual(flowed) < 1e-3);
  }
}

TEST_CASE("gradient flow with a tolerance stops at a stationary point") {
  Rng rng(39, 0);
  const auto c = random_chain(3, 8, model::BoundaryCondition::Periodic, rng);
  const auto flowed = dyn::gradient_flow(c, 5000.0, 1e-2, 1e-8);
  CHECK(std::sqrt(model::grad_energy_norm_sq(flowed)) <= 1e-8);
  CHECK(paths::coplanarity_residual(flowed) < 1e-4);
}

TEST_CASE("center of mass: frozen at near-zero temperature") {
  Rng rng(40, 0);
  const auto start = model::SpinChain::aligned(2, 8, model::BoundaryCondition::Free);
  dyn::IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.record_stride = 100;
  const auto trace = dyn::center_of_mass_trace(start, 1e10, cfg, 1.0, rng);
  for (double x : trace.xbar) CHECK(std::abs(x - trace.xbar.front()) < 1e-4);
}

TEST_CASE("center of mass diffuses at rate 2/(beta L)") {
  const double beta = 8.0;
  const int L = 8, replicas = 120;
  const double T = 4.0;
  std::vector<std::vector<double>> xbars;
  for (int r = 0; r < replicas; ++r) {
    Rng rng(41, static_cast<uint64_t>(r));
    const auto start = smp::sample_free_gibbs(2, L, beta, rng);
    dyn::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.record_stride = 200;
    const auto trace = dyn::center_of_mass_trace(start, beta, cfg, T, rng);
    std::vector<double> rel;
    for (double x : trace.xbar) rel.push_back(x - trace.xbar.front());
    xbars.push_back(std::move(rel));
    if (r == 0) {
      // times are shared across replicas
      CHECK(trace.times.back() == doctest::Approx(T));
    }
  }
  std::vector<double> ts, vars;
  const size_t n_rec = xbars.front().size();
  for (size_t k = 1; k < n_rec; ++k) {
    std::vector<double> d;
    for (const auto& x : xbars) d.push_back(x[k]);
    ts.push_back(static_cast<double>(k) * 0.2);
    vars.push_back(stats::variance(d));
  }
  const auto fit = stats::fit_line(ts, vars);
  const double expected = 2.0 / (beta * L);
  CHECK(std::abs(fit.slope - expected) < 0.2 * expected);
}

TEST_CASE("center-of-mass slope is insensitive to the boundary term") {
  const double beta = 8.0;
  const int L = 8, replicas = 80;
  const auto slope_for = [&](model::BoundaryCondition bc, uint64_t seed) {
    std::vector<std::vector<double>> xbars;
    for (int r = 0; r < replicas; ++r) {
      Rng rng(seed, static_cast<uint64_t>(r));
      model::SpinChain start(2, L, bc);
      // start aligned so periodic lifts are defined
      for (int i = 0; i < L; ++i) start.spin(i)[0] = 1.0;
      dyn::IntegratorConfig cfg;
      cfg.dt = 1e-3;
      cfg.record_stride = 200;
      const auto trace = dyn::center_of_mass_trace(start, beta, cfg, 3.0, rng);
      std::vector<double> rel;
      for (double x : trace.xbar) rel.push_back(x - trace.xbar.front());
      xbars.push_back(std::move(rel));
    }
    std::vector<double> ts, vars;
    for (size_t k = 1; k < xbars.front().size(); ++k) {
      std::vector<double> d;
      for (const auto& x : xbars) d.push_back(x[k]);
      ts.push_back(static_cast<double>(k) * 0.2);
      vars.push_back(stats::variance(d));
    }
    const auto fit = stats::fit_line(ts, vars);
    return std::pair(fit.slope, fit.slope_stderr);
  };
  const auto [sf, ef] = slope_for(model::BoundaryCondition::Free, 42);
  const auto [sp, ep] = slope_for(model::BoundaryCondition::Periodic, 43);
  CHECK(std::abs(sf - sp) < 3.0 * std::sqrt(ef * ef + ep * ep) + 0.1 * (2.0 / (beta * L)));
}

TEST_CASE("center of mass rejects nonzero winding") {
  Rng rng(44, 0);
  const auto ring = model::SpinChain::ring(8, 1, model::BoundaryCondition::Periodic);
  dyn::IntegratorConfig cfg;
  CHECK_THROWS_AS(dyn::center_of_mass_trace(ring, 8.0, cfg, 1.0, rng), Error);
}
