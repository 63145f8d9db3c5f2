#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spinchain/quadrature.hpp"
#include "spinchain/sampling.hpp"
#include "spinchain/spectral.hpp"
#include "spinchain/stats.hpp"

using namespace spinchain;
namespace smp = spinchain::sampling;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Quadrature moments of the density sin^a e^{b cos} on [0, pi].
double theta_density_moment(double a, double b, const std::function<double(double)>& g) {
  const auto w = [a, b](double t) { return std::pow(std::sin(t), a) * std::exp(b * std::cos(t)); };
  const double z = quadrature::integrate(w, 0.0, kPi, 1e-12).value;
  return quadrature::integrate([&](double t) { return g(t) * w(t); }, 0.0, kPi, 1e-12).value / z;
}

double circle_density_moment(double b, const std::function<double(double)>& g) {
  const auto w = [b](double t) { return std::exp(b * std::cos(t)); };
  const double z = quadrature::integrate(w, -kPi, kPi, 1e-12).value;
  return quadrature::integrate([&](double t) { return g(t) * w(t); }, -kPi, kPi, 1e-12).value / z;
}
}  // namespace

TEST_CASE("sample_theta: flat case passes a KS test") {
  Rng rng(11, 0);
  const int n = 100000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = smp::sample_theta(0.0, 0.0, rng);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = xs[i] / kPi;
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  // level 0.01 critical value 1.63 / sqrt(n)
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_theta: symmetric sine case has zero mean cosine") {
  Rng rng(12, 0);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::cos(smp::sample_theta(1.0, 0.0, rng));
  const double mean = s / n;
  // under sin(t)/2 the variance of cos is 1/3
  const double se = std::sqrt(1.0 / 3.0 / n);
  CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("sample_theta: tilted case matches quadrature") {
  Rng rng(13, 0);
  const int n = 100000;
  std::vector<double> cosines(n);
  for (int i = 0; i < n; ++i) cosines[i] = std::cos(smp::sample_theta(1.0, 4.0, rng));
  const double mean = stats::mean(cosines);
  const double expected = theta_density_moment(1.0, 4.0, [](double t) { return std::cos(t); });
  const double se = std::sqrt(stats::variance(cosines) / n);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("sample_theta: large-b envelope still exact") {
  Rng rng(14, 0);
  const int n = 50000;
  for (double b : {16.0, 64.0}) {
    std::vector<double> cosines(n);
    smp::RejectionStats rs;
    for (int i = 0; i < n; ++i) cosines[i] = std::cos(smp::sample_theta(2.0, b, rng, &rs));
    const double expected = theta_density_moment(2.0, b, [](double t) { return std::cos(t); });
    const double se = std::sqrt(stats::variance(cosines) / n);
    CHECK(std::abs(stats::mean(cosines) - expected) < 3.5 * se);
    CHECK(rs.acceptance() > 0.05);
  }
}

TEST_CASE("circle sampler matches quadrature") {
  Rng rng(15, 0);
  const int n = 100000;
  for (double b : {0.5, 4.0}) {
    std::vector<double> cosines(n), sines(n);
    for (int i = 0; i < n; ++i) {
      const double t = smp::sample_circle_angle(b, rng);
      cosines[i] = std::cos(t);
      sines[i] = std::sin(t);
    }
    const double expected = circle_density_moment(b, [](double t) { return std::cos(t); });
    CHECK(std::abs(stats::mean(cosines) - expected) <
          3.0 * std::sqrt(stats::variance(cosines) / n));
    CHECK(std::abs(stats::mean(sines)) < 3.0 * std::sqrt(stats::variance(sines) / n));
  }
}

TEST_CASE("coords_to_spins closed forms") {
  // all angles zero: every spin at e1
  smp::IncrementCoordinates c;
  c.n_dim = 3;
  c.thetas = {0.0, 0.0, 0.0, 0.0};
  Rng rng(16, 0);
  for (int i = 0; i < 4; ++i) c.axes.push_back(smp::uniform_equatorial(3, rng));
  const auto chain = smp::coords_to_spins(c);
  for (int i = 0; i < 4; ++i) {
    CHECK(chain.spin(i)[0] == doctest::Approx(1.0));
  }

  // XY case: angles accumulate
  smp::IncrementCoordinates xy;
  xy.n_dim = 2;
  xy.thetas = {kPi / 2, kPi / 2};
  const auto xyc = smp::coords_to_spins(xy);
  CHECK(xyc.spin(0)[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(xyc.spin(0)[1] == doctest::Approx(1.0));
  CHECK(xyc.spin(1)[0] == doctest::Approx(-1.0));
  CHECK(std::abs(xyc.spin(1)[1]) < 1e-12);
}

TEST_CASE("increment angles drive neighbor dot products") {
  Rng rng(17, 0);
  for (int n_dim : {2, 3, 5}) {
    const auto coords = smp::sample_increment_coords(n_dim, 8, 1.5, rng);
    const auto chain = smp::coords_to_spins(coords);
    CHECK(chain.max_unit_violation() < 1e-12);
    for (int i = 0; i + 1 < 8; ++i) {
      const double expected = std::cos(coords.thetas[static_cast<size_t>(i + 1)]);
      CHECK(dot(chain.spin(i), chain.spin(i + 1)) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("free sampler energy identity") {
  Rng rng(18, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto coords = smp::sample_increment_coords(3, 10, 2.0, rng);
    const auto chain = smp::coords_to_spins(coords);
    double s = 0.0;
    for (size_t i = 1; i < coords.thetas.size(); ++i) s += std::cos(coords.thetas[i]);
    CHECK(-model::energy(chain) == doctest::Approx(s).epsilon(1e-10));
  }
}

TEST_CASE("free sampler at infinite temperature is sitewise uniform") {
  Rng rng(19, 0);
  const int n = 100000, cells = 32;
  // equal-measure cells: 16 quantile slabs of the first coordinate x 2
  // hemispheres of the second; slab edges from the marginal quantiles
  for (int n_dim : {2, 3}) {
    // quantiles of t = x . e1 with density prop. to (1 - t^2)^{(n-3)/2}
    const auto w = [n_dim](double t) {
      return std::pow(std::max(1e-14, 1.0 - t * t), 0.5 * (n_dim - 3));
    };
    const double z = quadrature::integrate(w, -1.0, 1.0, 1e-12).value;
    std::vector<double> edges{-1.0};
    for (int q = 1; q < 16; ++q) {
      double lo = -1.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = quadrature::integrate(w, -1.0, mid, 1e-12).value / z;
        (cdf < q / 16.0 ? lo : hi) = mid;
      }
      edges.push_back(0.5 * (lo + hi));
    }
    edges.push_back(1.0);
    std::vector<int> counts(cells, 0);
    for (int i = 0; i < n; ++i) {
      const auto chain = smp::sample_free_gibbs(n_dim, 2, 0.0, rng);
      const auto s = chain.spin(i % 2);
      const int slab =
          static_cast<int>(std::upper_bound(edges.begin(), edges.end(), s[0]) - edges.begin()) - 1;
      const int cell = 2 * std::clamp(slab, 0, 15) + (s[1] >= 0.0 ? 1 : 0);
      ++counts[static_cast<size_t>(cell)];
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(n) / cells;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    // chi-square 31 dof, level 0.01
    CHECK(chi2 < 52.191);
  }
}

TEST_CASE("free sampler bond statistics match quadrature and factorize") {
  Rng rng(20, 0);
  const int n = 20000, L = 6;
  const double beta = 2.0;
  std::vector<std::vector<double>> bond(static_cast<size_t>(L - 1));
  for (int i = 0; i < n; ++i) {
    const auto chain = smp::sample_free_gibbs(3, L, beta, rng);
    for (int b = 0; b + 1 < L; ++b)
      bond[static_cast<size_t>(b)].push_back(dot(chain.spin(b), chain.spin(b + 1)));
  }
  const double expected = theta_density_moment(1.0, beta, [](double t) { return std::cos(t); });
  for (int b = 0; b + 1 < L; ++b) {
    const double m = stats::mean(bond[static_cast<size_t>(b)]);
    const double se = std::sqrt(stats::variance(bond[static_cast<size_t>(b)]) / n);
    CHECK(std::abs(m - expected) < 3.0 * se);
  }
  // neighbor bond values are mutually uncorrelated
  for (int a = 0; a + 1 < L; ++a) {
    for (int b = a + 1; b + 1 < L; ++b) {
      const double ma = stats::mean(bond[static_cast<size_t>(a)]);
      const double mb = stats::mean(bond[static_cast<size_t>(b)]);
      double cov = 0.0;
      for (int i = 0; i < n; ++i)
        cov += (bond[static_cast<size_t>(a)][static_cast<size_t>(i)] - ma) *
               (bond[static_cast<size_t>(b)][static_cast<size_t>(i)] - mb);
      cov /= n - 1;
      const double corr = cov / std::sqrt(stats::variance(bond[static_cast<size_t>(a)]) *
                                          stats::variance(bond[static_cast<size_t>(b)]));
      CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("periodic sampling: zero coupling gives equal weights") {
  Rng rng(21, 0);
  const auto batch = smp::sample_periodic_batch(2, 6, 0.0, 100, rng, smp::PeriodicMethod::Reweight);
  for (const auto& s : batch.samples) CHECK(s.log_weight == doctest::Approx(0.0));
  CHECK(batch.ess == doctest::Approx(100.0));
}

TEST_CASE("periodic sampling: reweight and mcmc agree") {
  Rng rng(22, 0);
  const int n = 30000, L = 8;
  const double beta = 1.0;
  const auto rw = smp::sample_periodic_batch(2, L, beta, n, rng, smp::PeriodicMethod::Reweight);
  double sw = 0.0, swx = 0.0, swx2 = 0.0;
  for (const auto& s : rw.samples) {
    const double w = std::exp(s.log_weight - beta);
    const double x = dot(s.chain.spin(0), s.chain.spin(1));
    sw += w;
    swx += w * x;
    swx2 += w * x * x;
  }
  const double m_rw = swx / sw;
  const double var_rw = swx2 / sw - m_rw * m_rw;
  const double se_rw = std::sqrt(var_rw / rw.ess);

  smp::PeriodicOptions opts;
  opts.mcmc_burn_in_sweeps = 500;
  const auto mc = smp::sample_periodic_batch(2, L, beta, n, rng, smp::PeriodicMethod::MCMC, opts);
  std::vector<double> xs;
  for (const auto& s : mc.samples) xs.push_back(dot(s.chain.spin(0), s.chain.spin(1)));
  const double m_mc = stats::mean(xs);
  // consecutive sweeps are correlated; batch means absorb that
  const double se_mc = stats::batch_means_stderr(xs);
  CHECK(std::abs(m_rw - m_mc) < 3.0 * std::sqrt(se_rw * se_rw + se_mc * se_mc));
}

TEST_CASE("periodic sampling matches the grid stationary law at L = 3") {
  Rng rng(23, 0);
  const double oracle = spectral::xy_gibbs_expectation_s1s2(3, 1.0, 64,
                                                            model::BoundaryCondition::Periodic);
  const int n = 60000;
  const auto rw = smp::sample_periodic_batch(2, 3, 1.0, n, rng, smp::PeriodicMethod::Reweight);
  double sw = 0.0, swx = 0.0;
  for (const auto& s : rw.samples) {
    const double w = std::exp(s.log_weight - 1.0);
    sw += w;
    swx += w * dot(s.chain.spin(0), s.chain.spin(1));
  }
  CHECK(std::abs(swx / sw - oracle) < 0.02 * std::max(0.05, std::abs(oracle)) + 0.01);

  const auto mc = smp::sample_periodic_batch(2, 3, 1.0, n, rng, smp::PeriodicMethod::MCMC);
  std::vector<double> xs;
  for (const auto& s : mc.samples) xs.push_back(dot(s.chain.spin(0), s.chain.spin(1)));
  CHECK(std::abs(stats::mean(xs) - oracle) < 0.02 * std::max(0.05, std::abs(oracle)) + 0.01);
}

TEST_CASE("heat bath satisfies detailed balance identities") {
  // The conditional density targeted by the heat-bath move is
  // proportional to exp(beta * S_i . m); detailed balance against the
  // Gibbs weights reduces to H(y) - H(x) = (x_i - y_i) . m.
  Rng rng(24, 0);
  for (int trial = 0; trial < 200; ++trial) {
    model::SpinChain x(3, 5, model::BoundaryCondition::Periodic);
    for (int i = 0; i < 5; ++i) x.set_spin(i, smp::uniform_sphere(3, rng));
    const int site = static_cast<int>(rng.next_u64() % 5);
    model::SpinChain y = x;
    y.set_spin(site, smp::uniform_sphere(3, rng));
    Vec m(3);
    m += x.spin_vec((site + 4) % 5);
    m += x.spin_vec((site + 1) % 5);
    const double lhs = model::energy(y) - model::energy(x);
    const double rhs = dot(x.spin_vec(site) - y.spin_vec(site), m);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
}

TEST_CASE("discrete heat-bath kernel fixes the discrete Gibbs law") {
  // Single-site heat bath on the M-grid of the L = 3 XY chain: applying the
  // kernel to the Gibbs vector reproduces it (total variation ~ rounding).
  const int M = 16, L = 3;
  const double beta = 1.0;
  const auto idx = [&](int a, int b, int c) { return (a * M + b) * M + c; };
  std::vector<double> pi(static_cast<size_t>(M * M * M));
  double zsum = 0.0;
  const auto bond = [&](int d) { return std::cos(2.0 * kPi * d / M); };
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b)
      for (int c = 0; c < M; ++c) {
        const double h = -(bond(b - a) + bond(c - b) + bond(a - c));
        pi[static_cast<size_t>(idx(a, b, c))] = std::exp(-beta * h);
        zsum += pi[static_cast<size_t>(idx(a, b, c))];
      }
  for (auto& p : pi) p /= zsum;
  // one heat-bath update of the middle site
  std::vector<double> out(pi.size(), 0.0);
  for (int a = 0; a < M; ++a)
    for (int c = 0; c < M; ++c) {
      double row_mass = 0.0, cond_z = 0.0;
      for (int b = 0; b < M; ++b) {
        row_mass += pi[static_cast<size_t>(idx(a, b, c))];
        cond_z += std::exp(beta * (bond(b - a) + bond(c - b)));
      }
      for (int b = 0; b < M; ++b)
        out[static_cast<size_t>(idx(a, b, c))] +=
            row_mass * std::exp(beta * (bond(b - a) + bond(c - b))) / cond_z;
    }
  double tv = 0.0;
  for (size_t k = 0; k < pi.size(); ++k) tv += std::abs(out[k] - pi[k]);
  CHECK(0.5 * tv < 1e-3);
}

TEST_CASE("reweighted estimator error halves when the sample count quadruples") {
  const int L = 8, k_batches = 24;
  const double beta = 1.5;
  const auto se_of = [&](int n, uint64_t stream0) {
    std::vector<double> means;
    for (int k = 0; k < k_batches; ++k) {
      Rng rng(25, stream0 + static_cast<uint64_t>(k));
      double sw = 0.0, swx = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto ws = smp::sample_periodic_gibbs(2, L, beta, rng, smp::PeriodicMethod::Reweight);
        const double w = std::exp(ws.log_weight - beta);
        sw += w;
        swx += w * dot(ws.chain.spin(L - 1), ws.chain.spin(0));
      }
      means.push_back(swx / sw);
    }
    return std::sqrt(stats::variance(means));
  };
  const double se1 = se_of(800, 0);
  const double se4 = se_of(3200, 1000);
  CHECK(se1 / se4 > 2.0 * 0.7);
  CHECK(se1 / se4 < 2.0 * 1.3);
}

TEST_CASE("effective sample size diagnostic flags degenerate weights") {
  Rng rng(26, 0);
  const auto batch = smp::sample_periodic_batch(2, 8, 12.0, 400, rng, smp::PeriodicMethod::Reweight);
  CHECK(batch.ess < 400.0);
  // beta = 12 reweighting is strongly degenerate for L = 8
  CHECK(batch.ess_too_low == (batch.ess / 400.0 < 0.01));
}

TEST_CASE("coordinate derivative bounds on a small grid") {
  Rng rng(27, 0);
  const auto rep = smp::verify_coordinate_derivative_bounds(3, 4, rng, 60);
  CHECK(!rep.theta_violation);
  CHECK(!rep.axis_violation);
  CHECK(rep.max_theta_norm <= 1.0 + 1e-4);
  CHECK(rep.max_axis_norm <= 4.0 + 1e-4);
  CHECK(rep.max_theta_norm > 0.5);  // the bound is active somewhere
}

TEST_CASE("derivative of a later spin with respect to an earlier block only") {
  // moving theta_j or v_j with j > i leaves S_i untouched
  Rng rng(28, 0);
  auto coords = smp::sample_increment_coords(3, 5, 1.0, rng);
  const auto chain = smp::coords_to_spins(coords);
  auto moved = coords;
  moved.thetas[4] += 0.3;
  moved.axes[4] = smp::uniform_equatorial(3, rng);
  const auto chain2 = smp::coords_to_spins(moved);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) CHECK(chain.spin(i)[k] == chain2.spin(i)[k]);
}

TEST_CASE("unit derivative at the first site with flat angles") {
  // with all angles zero, S_1 = cos(theta_1) e1 + sin(theta_1) v_1, so the
  // theta-derivative has exactly unit norm
  smp::IncrementCoordinates coords;
  coords.n_dim = 3;
  coords.thetas = {0.0, 0.0, 0.0};
  Rng rng(29, 0);
  for (int i = 0; i < 3; ++i) coords.axes.push_back(smp::uniform_equatorial(3, rng));
  const double h = 1e-5;
  auto p = coords, m = coords;
  p.thetas[0] += h;
  m.thetas[0] -= h;
  const auto cp = smp::coords_to_spins(p), cm = smp::coords_to_spins(m);
  Vec d(3);
  for (int k = 0; k < 3; ++k) d[k] = (cp.spin(0)[k] - cm.spin(0)[k]) / (2.0 * h);
  CHECK(norm(d) == doctest::Approx(1.0).epsilon(1e-6));
}
