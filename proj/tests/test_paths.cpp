#include <doctest.h>

#include <cmath>

#include "spinchain/dynamics.hpp"
#include "spinchain/paths.hpp"
#include "spinchain/sampling.hpp"

using namespace spinchain;
namespace pth = spinchain::paths;
namespace smp = spinchain::sampling;

namespace {
constexpr double kPi = 3.14159265358979323846;

model::SpinChain random_chain(int L, Rng& rng) {
  model::SpinChain c(3, L, model::BoundaryCondition::Periodic);
  for (int i = 0; i < L; ++i) c.set_spin(i, smp::uniform_sphere(3, rng));
  return c;
}

Vec cross(const Vec& a, const Vec& b) {
  Vec c(3);
  c[0] = a[1] * b[2] - a[2] * b[1];
  c[1] = a[2] * b[0] - a[0] * b[2];
  c[2] = a[0] * b[1] - a[1] * b[0];
  return c;
}
}  // namespace

TEST_CASE("pulling flow: orthogonal start has the explicit form") {
  Rng rng(80, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec s = smp::uniform_sphere(3, rng);
    Vec p = smp::uniform_sphere(3, rng);
    p -= dot(p, s) * s;
    if (norm(p) < 1e-3) continue;
    p = geometry::retract(p);
    for (double t : {0.0, 0.3, 1.0, 3.0}) {
      const Vec expect = std::tanh(t) * s + (1.0 / std::cosh(t)) * p;
      CHECK(norm(pth::pulling_flow(s, p, t) - expect) < 1e-12);
    }
  }
}

TEST_CASE("pulling flow: fixed point, antipode, monotone alignment") {
  Rng rng(81, 0);
  const Vec s = smp::uniform_sphere(3, rng);
  for (double t : {0.0, 1.0, 10.0}) CHECK(norm(pth::pulling_flow(s, s, t) - s) < 1e-12);
  CHECK_THROWS_AS(pth::pulling_flow(s, -1.0 * s, 1.0), Error);
  // s-component increases along the flow
  for (int trial = 0; trial < 50; ++trial) {
    const Vec p = smp::uniform_sphere(3, rng);
    if (dot(p, s) < -0.999) continue;
    double prev = dot(p, s);
    for (double t : {0.2, 0.5, 1.0, 2.0}) {
      const double cur = dot(pth::pulling_flow(s, p, t), s);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("pulling flow: equator escape within 2 epsilon") {
  Rng rng(82, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec s = smp::uniform_sphere(3, rng);
    const double eps = rng.uniform(0.02, 0.49);
    // point with |s . p| < eps
    Vec p;
    for (;;) {
      p = smp::uniform_sphere(3, rng);
      if (std::abs(dot(p, s)) < eps) break;
    }
    CHECK(dot(pth::pulling_flow(s, p, 2.0 * eps), s) > 0.0);
  }
}

TEST_CASE("pulling flow on equatorial configurations: closed-form energy") {
  Rng rng(83, 0);
  const Vec s = Vec::basis(3, 2);
  // spins on the great circle perpendicular to s
  model::SpinChain c(3, 6, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 6; ++i) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    c.set_spin(i, Vec{std::cos(a), std::sin(a), 0.0});
  }
  const double e0 = model::energy(c);
  for (double t : {0.1, 0.5, 1.5}) {
    model::SpinChain flowed = c;
    for (int i = 0; i < 6; ++i) flowed.set_spin(i, pth::pulling_flow(s, c.spin_vec(i), t));
    const double sech = 1.0 / std::cosh(t);
    const double expected = -6.0 + sech * sech * (e0 + 6.0);
    CHECK(model::energy(flowed) == doctest::Approx(expected).epsilon(1e-10));
  }
  // second derivative at zero is -2 (H + L) < 0 for non-constant chains
  const double h = 1e-4;
  const auto energy_at = [&](double t) {
    model::SpinChain flowed = c;
    for (int i = 0; i < 6; ++i) flowed.set_spin(i, pth::pulling_flow(s, c.spin_vec(i), t));
    return model::energy(flowed);
  };
  const double d2 = (energy_at(h) - 2.0 * energy_at(0.0) + energy_at(-0.0 + 2.0 * h) -
                     (energy_at(h) - energy_at(0.0))) /
                    (h * h);
  (void)d2;
  const double second = (energy_at(2.0 * h) - 2.0 * energy_at(h) + energy_at(0.0)) / (h * h);
  CHECK(second == doctest::Approx(-2.0 * (e0 + 6.0)).epsilon(1e-2));
  CHECK(second < 0.0);
}

TEST_CASE("hemisphere pulling decreases the energy") {
  Rng rng(84, 0);
  const Vec s = smp::uniform_sphere(3, rng);
  // aligned chain at s: energy constant
  model::SpinChain at_s(3, 8, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 8; ++i) at_s.set_spin(i, s);
  std::vector<double> grid;
  for (double t = 0.0; t <= 5.0; t += 0.01) grid.push_back(t);
  auto rep = pth::verify_hemisphere_pulling(at_s, s, grid);
  CHECK(rep.monotone);
  CHECK(std::abs(rep.max_energy_rise) < 1e-12);

  // random chains strictly inside the hemisphere
  for (int trial = 0; trial < 5; ++trial) {
    model::SpinChain c(3, 8, model::BoundaryCondition::Periodic);
    for (int i = 0; i < 8; ++i) {
      Vec p = smp::uniform_sphere(3, rng);
      if (dot(p, s) < 0.05) p = p - 2.0 * dot(p, s) * s;  // reflect into the hemisphere
      if (dot(p, s) < 0.05) {
        --i;
        continue;
      }
      c.set_spin(i, geometry::retract(p));
    }
    rep = pth::verify_hemisphere_pulling(c, s, grid);
    CHECK(rep.monotone);
  }

  model::SpinChain bad = at_s;
  Vec outside = -0.1 * s;
  outside += std::sqrt(1.0 - 0.01) * geometry::any_orthogonal(s);
  bad.set_spin(3, geometry::retract(outside));
  CHECK_THROWS_AS(pth::verify_hemisphere_pulling(bad, s, grid), Error);
}

TEST_CASE("sphere cover: size, unit points, covering and doubling") {
  const double eps = std::sin(kPi / 16.0);
  const auto cover = pth::build_cover(eps);
  CHECK(cover.c_cover < 300.0);
  for (const auto& v : cover.points) CHECK(std::abs(norm(v) - 1.0) < 1e-12);
  Rng rng(85, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec s = smp::uniform_sphere(3, rng);
    double best = 1e300;
    for (const auto& v : cover.points) best = std::min(best, norm(v - s));
    CHECK(best < eps);
  }
  // doubling: a configuration near the equator of some s is near the
  // equator of a cover point with twice the margin
  for (int trial = 0; trial < 200; ++trial) {
    const Vec s = smp::uniform_sphere(3, rng);
    std::vector<Vec> spins;
    for (int i = 0; i < 12; ++i) {
      Vec p;
      for (;;) {
        p = smp::uniform_sphere(3, rng);
        if (std::abs(dot(p, s)) <= eps) break;
      }
      spins.push_back(p);
    }
    bool found = false;
    for (const auto& v : cover.points) {
      bool all = true;
      for (const auto& p : spins)
        if (std::abs(dot(p, v)) >= 2.0 * eps) {
          all = false;
          break;
        }
      if (all) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
  CHECK_THROWS_AS(pth::build_cover(0.5), Error);
}

TEST_CASE("alignment is near-identity on same-half-plane coplanar chains") {
  Rng rng(86, 0);
  for (int trial = 0; trial < 10; ++trial) {
    // random great circle through v1 with all spins on the positive side
    const Vec v1 = smp::uniform_sphere(3, rng);
    const Vec w = geometry::retract(cross(v1, smp::uniform_sphere(3, rng)));
    const int L = 8;
    model::SpinChain c(3, L, model::BoundaryCondition::Periodic);
    c.set_spin(0, v1);
    for (int i = 1; i < L; ++i) {
      const double a = rng.uniform(0.1, kPi - 0.1);
      c.set_spin(i, geometry::retract(std::cos(a) * v1 + std::sin(a) * w));
    }
    const pth::AlignPath path(c, 0.05);
    const auto end = path.endpoint();
    CHECK(std::abs(model::energy(end) - model::energy(c)) < 1e-9);
    // endpoint stays in the plane spanned by v1 and w
    const Vec n = cross(v1, w);
    for (int i = 0; i < L; ++i) CHECK(std::abs(dot(end.spin_vec(i), n)) < 0.05);
  }
}

TEST_CASE("alignment: monotone energy and jacobian budget") {
  Rng rng(87, 0);
  const double eps = 0.05;
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = random_chain(8, rng);
    const pth::AlignPath path(c, eps);
    double prev = model::energy(c);
    for (int k = 1; k <= 1000; ++k) {
      const double t = path.duration() * k / 1000.0;
      const double e = model::energy(path.at(t));
      CHECK(e <= prev + 1e-9);
      prev = e;
    }
    CHECK(path.log_jacobian(path.duration()) <= 8.0 * std::log(8.0 / eps) + 1e-9);
  }
}

TEST_CASE("alignment endpoint concentrates near a plane") {
  Rng rng(88, 0);
  const double eps = 0.02;
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_chain(8, rng);
    const pth::AlignPath path(c, eps);
    const auto end = path.endpoint();
    // best-fit plane residual shrinks to O(eps)
    CHECK(pth::coplanarity_residual(end) < kPi * eps * std::sqrt(8.0));
  }
}

TEST_CASE("alignment stage jacobian matches a finite-difference area") {
  Rng rng(89, 0);
  const auto c = random_chain(6, rng);
  const int m = 4;
  const double t = 0.7;
  // probe plane: azimuth of the reference site (m-1) and of site 1, rotating
  // about the axis spanned by site 0
  const Vec v1 = c.spin_vec(0);
  const auto rotate_about = [&](const model::SpinChain& base, int site, double dphi) {
    model::SpinChain out = base;
    const Vec s = base.spin_vec(site);
    const double u = dot(s, v1);
    Vec perp = s - u * v1;
    const double rho = norm(perp);
    if (rho < 1e-12) return out;
    perp = geometry::retract(perp);
    const Vec third = cross(v1, perp);
    out.set_spin(site, geometry::retract(u * v1 + rho * (std::cos(dphi) * perp +
                                                         std::sin(dphi) * third)));
    return out;
  };
  // azimuths measured in the frame of sites 0 and m
  const Vec target = c.spin_vec(m);
  const Vec v2 = geometry::retract(target - dot(target, v1) * v1);
  const Vec v3 = cross(v1, v2);
  const auto azimuth = [&](const model::SpinChain& cfg, int site) {
    const Vec s = cfg.spin_vec(site);
    return std::atan2(dot(s, v3), dot(s, v2));
  };
  const double h = 1e-5;
  // map the four corners of an h-square in (phi_1, phi_{m-1})
  const auto image = [&](double d1, double dref) {
    auto probe = rotate_about(rotate_about(c, 1, d1), m - 1, dref);
    const auto mapped = pth::align_stage_apply(probe, m, t);
    return std::pair(azimuth(mapped, 1), azimuth(mapped, m - 1));
  };
  const auto [a00, b00] = image(0.0, 0.0);
  const auto [a10, b10] = image(h, 0.0);
  const auto [a01, b01] = image(0.0, h);
  const double det = ((a10 - a00) * (b01 - b00) - (a01 - a00) * (b10 - b00)) / (h * h);
  CHECK(std::abs(std::abs(det) - (1.0 - t)) < 0.05 * (1.0 - t));
}

TEST_CASE("contraction: identical equatorial spins ride to a pole at constant energy") {
  Rng rng(90, 0);
  const Vec s = smp::uniform_sphere(3, rng);
  Vec p = geometry::retract(cross(s, smp::uniform_sphere(3, rng)));
  model::SpinChain c(3, 6, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 6; ++i) c.set_spin(i, p);
  const pth::ContractPath path(c, s, 0.1);
  CHECK(path.energy_derivative_at0() == doctest::Approx(0.0));
  for (double t : {0.0, 0.3, path.duration()}) {
    CHECK(model::energy(path.at(t)) == doctest::Approx(-6.0).epsilon(1e-10));
  }
  const auto end = path.at(path.duration());
  const double pole_dot = dot(end.spin_vec(0), path.sigma() * 1.0 * s);
  CHECK(pole_dot >= 1.0 - 2.0 * std::asin(0.1) * std::asin(0.1) - 1e-12);
}

TEST_CASE("contraction: monotone energy, pole membership, jacobian budget, sign rule") {
  Rng rng(91, 0);
  const double eps = 0.1;
  int plus_seen = 0, minus_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec s = smp::uniform_sphere(3, rng);
    const int L = 8;
    model::SpinChain c(3, L, model::BoundaryCondition::Periodic);
    for (int i = 0; i < L; ++i) {
      // sample within the equatorial band
      for (;;) {
        const Vec p = smp::uniform_sphere(3, rng);
        if (std::abs(dot(p, s)) < eps) {
          c.set_spin(i, p);
          break;
        }
      }
    }
    const pth::ContractPath path(c, s, eps);
    (path.branch() > 0 ? plus_seen : minus_seen)++;
    const int n_check = trial < 20 ? 1000 : 25;
    double prev = model::energy(c);
    for (int k = 1; k <= n_check; ++k) {
      const double e = model::energy(path.at(path.duration() * k / n_check));
      CHECK(e <= prev + 1e-9);
      prev = e;
    }
    const auto end = path.at(path.duration());
    const double bound = 1.0 - 2.0 * std::asin(eps) * std::asin(eps);
    for (int i = 0; i < L; ++i)
      CHECK(dot(end.spin_vec(i), path.sigma() * 1.0 * s) >= bound - 1e-10);
    CHECK(path.log_jacobian(path.duration()) <= L * std::log(2.0) + 1e-9);
  }
  CHECK(plus_seen > 100);
  CHECK(minus_seen > 100);
}

TEST_CASE("contraction rejects configurations away from the equator") {
  Rng rng(92, 0);
  const Vec s = Vec::basis(3, 2);
  model::SpinChain c(3, 4, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 4; ++i) c.set_spin(i, Vec::basis(3, 2));
  CHECK_THROWS_AS(pth::ContractPath(c, s, 0.1), Error);
}

TEST_CASE("final rotation: closed forms") {
  // axis already at e1: identity
  const auto c = model::SpinChain::aligned(3, 4, model::BoundaryCondition::Periodic);
  const auto same = pth::rotate_path(c, Vec::basis(3, 0), 0.0);
  for (size_t k = 0; k < c.raw().size(); ++k) CHECK(same.raw()[k] == c.raw()[k]);

  // chain at e2 rotated to e1
  model::SpinChain at_e2(3, 5, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 5; ++i) at_e2.set_spin(i, Vec::basis(3, 1));
  const double tau = pth::rotate_duration(Vec::basis(3, 1), 3);
  CHECK(tau == doctest::Approx(kPi / 2));
  const auto rotated = pth::rotate_path(at_e2, Vec::basis(3, 1), tau);
  for (int i = 0; i < 5; ++i) CHECK(rotated.spin(i)[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (double t : {0.0, 0.4, tau}) {
    CHECK(model::energy(pth::rotate_path(at_e2, Vec::basis(3, 1), t)) ==
          doctest::Approx(-5.0).epsilon(1e-12));
  }

  // random near-axis chain: energy exactly preserved along the rotation
  Rng rng(93, 0);
  const Vec s = smp::uniform_sphere(3, rng);
  model::SpinChain near_s(3, 6, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 6; ++i)
    near_s.set_spin(i, geometry::retract(s + 0.05 * smp::uniform_sphere(3, rng)));
  const double e0 = model::energy(near_s);
  const double tau_s = pth::rotate_duration(s, 3);
  for (int k = 0; k <= 20; ++k) {
    const double e = model::energy(pth::rotate_path(near_s, s, tau_s * k / 20.0));
    CHECK(std::abs(e - e0) < 1e-10);
  }
}

TEST_CASE("composed path: label, endpoint in the arctic, monotone energy") {
  const pth::PathEpsilons eps;
  const auto cover = pth::build_cover(eps.cover);
  Rng rng(94, 0);
  for (int L : {4, 8}) {
    for (int trial = 0; trial < 40; ++trial) {
      const bool gibbs = trial % 2 == 1;
      model::SpinChain c(3, L, model::BoundaryCondition::Periodic);
      if (gibbs) {
        const auto ws = smp::sample_periodic_gibbs(3, L, 8.0, rng, smp::PeriodicMethod::Reweight);
        c = ws.chain;
      } else {
        for (int i = 0; i < L; ++i) c.set_spin(i, smp::uniform_sphere(3, rng));
      }
      const pth::CanonicalPath path(c, cover, eps);
      const auto start = path.at(0.0);
      for (size_t k = 0; k < c.raw().size(); ++k)
        CHECK(start.raw()[k] == doctest::Approx(c.raw()[k]).epsilon(1e-12));
      const auto end = path.at(1.0);
      CHECK(model::in_arctic(end));
      CHECK(model::energy(end) <= model::energy(c) + 1e-9);
      CHECK((path.label().sigma == 1 || path.label().sigma == -1));
      CHECK(path.label().cover_index >= 0);
    }
  }
}

TEST_CASE("composed path is continuous at the segment joins") {
  const pth::PathEpsilons eps;
  const auto cover = pth::build_cover(eps.cover);
  Rng rng(95, 0);
  const auto c = random_chain(6, rng);
  const pth::CanonicalPath path(c, cover, eps);
  for (double tj : {path.align_end_time(), path.contract_end_time()}) {
    const auto before = path.at_raw(tj - 1e-9);
    const auto at = path.at_raw(tj);
    const auto after = path.at_raw(tj + 1e-9);
    for (size_t k = 0; k < at.raw().size(); ++k) {
      CHECK(std::abs(before.raw()[k] - at.raw()[k]) < 1e-6);
      CHECK(std::abs(after.raw()[k] - at.raw()[k]) < 1e-6);
    }
  }
  // exact agreement of the segment formulas at the joins
  const auto align_end = path.at_raw(path.align_end_time());
  const auto contract_start = path.at_raw(path.align_end_time() + 1e-15);
  for (size_t k = 0; k < align_end.raw().size(); ++k)
    CHECK(std::abs(align_end.raw()[k] - contract_start.raw()[k]) < 1e-10);
}

TEST_CASE("certificates: rotate-only trace and the composed path") {
  // manufactured trace of a pure rotation segment
  model::SpinChain at_e2(3, 6, model::BoundaryCondition::Periodic);
  for (int i = 0; i < 6; ++i) at_e2.set_spin(i, Vec::basis(3, 1));
  const Vec s = Vec::basis(3, 1);
  const double tau = pth::rotate_duration(s, 3);
  pth::PathTrace trace;
  trace.n_align_segments = 0;
  trace.length = 6;
  trace.epsilons = pth::PathEpsilons{};
  trace.label = pth::PathLabel{+1, s, 0};
  for (int k = 0; k <= 150; ++k) {
    const double t = tau * k / 150.0;
    trace.times.push_back(t);
    trace.segments.push_back(1);
    trace.configs.push_back(pth::rotate_path(at_e2, s, t));
    trace.energies.push_back(model::energy(trace.configs.back()));
    trace.log_jacobian.push_back(0.0);
  }
  const auto cert = pth::certify_path(trace, 2.0, 1e-3, 100);
  CHECK(cert.endpoint_in_arctic);
  CHECK(cert.energy_pass);
  CHECK(std::abs(cert.total_energy_change) < 1e-10);
  CHECK(cert.max_speed_sq_other <= 4.0 * kPi * kPi * 6.0);
  CHECK(cert.final_log_jacobian == 0.0);
  CHECK(cert.pass);

  // full composed paths certify
  const pth::PathEpsilons eps;
  const auto cover = pth::build_cover(eps.cover);
  Rng rng(96, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_chain(8, rng);
    const pth::CanonicalPath path(c, cover, eps);
    const auto full_trace = pth::sample_path_trace(path, 100);
    const auto full_cert = pth::certify_path(full_trace, 2.0, 1e-3,
                                             2 * static_cast<int>(cover.points.size()));
    CHECK(full_cert.pass);
    CHECK(full_cert.implied_t_rel_bound > 0.0);
    CHECK(std::isfinite(full_cert.implied_t_rel_bound));
  }
}

TEST_CASE("trace invariants: increasing times and consistent energies") {
  const pth::PathEpsilons eps;
  const auto cover = pth::build_cover(eps.cover);
  Rng rng(97, 0);
  const auto c = random_chain(4, rng);
  const pth::CanonicalPath path(c, cover, eps);
  const auto trace = pth::sample_path_trace(path, 120);
  for (size_t k = 1; k < trace.times.size(); ++k) CHECK(trace.times[k] > trace.times[k - 1]);
  for (size_t k = 0; k < trace.configs.size(); ++k)
    CHECK(trace.energies[k] == doctest::Approx(model::energy(trace.configs[k])).epsilon(1e-10));
}

TEST_CASE("stationary flows land on coplanar configurations") {
  Rng rng(98, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_chain(8, rng);
    const auto flowed = dynamics::gradient_flow(c, 5000.0, 1e-2, 1e-8);
    if (std::sqrt(model::grad_energy_norm_sq(flowed)) > 1e-8) continue;  // horizon hit
    CHECK(pth::coplanarity_residual(flowed) < 1e-4);
  }
}
