#include "spinchain/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "spinchain/geometry.hpp"
#include "spinchain/linalg.hpp"

namespace spinchain::sampling {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Marsaglia-Tsang gamma variate, shape > 0, unit scale.
double gamma_variate(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform_pos();
    return gamma_variate(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

// Envelope for b >= 1: sin^a(t) e^{b cos t} <= t^a e^b e^{-2 b t^2 / pi^2},
// using cos t <= 1 - 2 t^2 / pi^2 on [0, pi]. The proposal t = sqrt(G),
// G ~ Gamma((a+1)/2, rate 2b/pi^2), matches the polynomial-times-Gaussian
// shape of the envelope.
double sample_theta(double a, double b, Rng& rng, RejectionStats* stats) {
  if (a < 0.0 || b < 0.0) throw Error(Errc::InvalidConfig, "sample_theta requires a, b >= 0");
  if (b < 1.0) {
    for (;;) {
      const double t = rng.uniform(0.0, kPi);
      if (stats) ++stats->proposals;
      const double log_accept = a * std::log(std::max(std::sin(t), 1e-300)) + b * (std::cos(t) - 1.0);
      if (std::log(rng.uniform_pos()) < log_accept) {
        if (stats) ++stats->accepts;
        return t;
      }
    }
  }
  const double rate = 2.0 * b / (kPi * kPi);
  for (;;) {
    const double t = std::sqrt(gamma_variate(0.5 * (a + 1.0), rng) / rate);
    if (stats) ++stats->proposals;
    if (t >= kPi) continue;
    const double ratio = t > 1e-12 ? std::sin(t) / t : 1.0;
    const double log_accept = a * std::log(ratio) + b * (std::cos(t) - 1.0 + 2.0 * t * t / (kPi * kPi));
    if (std::log(rng.uniform_pos()) < log_accept) {
      if (stats) ++stats->accepts;
      return t;
    }
  }
}

double sample_circle_angle(double b, Rng& rng, RejectionStats* stats) {
  if (b < 0.0) throw Error(Errc::InvalidConfig, "sample_circle_angle requires b >= 0");
  if (b < 1.0) {
    for (;;) {
      const double t = rng.uniform(-kPi, kPi);
      if (stats) ++stats->proposals;
      if (std::log(rng.uniform_pos()) < b * (std::cos(t) - 1.0)) {
        if (stats) ++stats->accepts;
        return t;
      }
    }
  }
  const double sigma = kPi / (2.0 * std::sqrt(b));
  for (;;) {
    const double t = sigma * rng.gaussian();
    if (stats) ++stats->proposals;
    if (t <= -kPi || t > kPi) continue;
    if (std::log(rng.uniform_pos()) < b * (std::cos(t) - 1.0 + 2.0 * t * t / (kPi * kPi))) {
      if (stats) ++stats->accepts;
      return t;
    }
  }
}

Vec uniform_sphere(int n_dim, Rng& rng) {
  for (;;) {
    Vec x(n_dim);
    for (int k = 0; k < n_dim; ++k) x[k] = rng.gaussian();
    const double r = norm(x);
    if (r > 1e-8) return (1.0 / r) * x;
  }
}

Vec uniform_equatorial(int n_dim, Rng& rng) {
  if (n_dim < 3) throw Error(Errc::InvalidDimension, "equatorial axis needs n_dim >= 3");
  for (;;) {
    Vec x(n_dim);
    for (int k = 1; k < n_dim; ++k) x[k] = rng.gaussian();
    const double r = norm(x);
    if (r > 1e-8) return (1.0 / r) * x;
  }
}

IncrementCoordinates sample_increment_coords(int n_dim, int length, double beta, Rng& rng) {
  IncrementCoordinates c;
  c.n_dim = n_dim;
  c.thetas.resize(static_cast<size_t>(length));
  if (n_dim == 2) {
    c.thetas[0] = rng.uniform(0.0, 2.0 * kPi);
    for (int i = 1; i < length; ++i) {
      double t = sample_circle_angle(beta, rng);
      if (t < 0.0) t += 2.0 * kPi;
      c.thetas[static_cast<size_t>(i)] = t;
    }
    return c;
  }
  c.axes.reserve(static_cast<size_t>(length));
  const double a = n_dim - 2;
  c.thetas[0] = sample_theta(a, 0.0, rng);
  c.axes.push_back(uniform_equatorial(n_dim, rng));
  for (int i = 1; i < length; ++i) {
    c.thetas[static_cast<size_t>(i)] = sample_theta(a, beta, rng);
    c.axes.push_back(uniform_equatorial(n_dim, rng));
  }
  return c;
}

model::SpinChain coords_to_spins(const IncrementCoordinates& coords) {
  const int L = static_cast<int>(coords.thetas.size());
  const int n = coords.n_dim;
  model::SpinChain chain(n, L, model::BoundaryCondition::Free);
  if (n == 2) {
    double acc = 0.0;
    for (int i = 0; i < L; ++i) {
      acc += coords.thetas[static_cast<size_t>(i)];
      chain.spin(i)[0] = std::cos(acc);
      chain.spin(i)[1] = std::sin(acc);
    }
    return chain;
  }
  // Maintain M_i = R_1...R_i as a dense matrix; each factor is a rank-2
  // update M R = M + (M e1) a^T + (M v) b^T.
  double m[kMaxDim][kMaxDim] = {};
  for (int k = 0; k < n; ++k) m[k][k] = 1.0;
  for (int i = 0; i < L; ++i) {
    const double th = coords.thetas[static_cast<size_t>(i)];
    const Vec& v = coords.axes[static_cast<size_t>(i)];
    const double ct = std::cos(th), st = std::sin(th);
    double me1[kMaxDim], mv[kMaxDim];
    for (int r = 0; r < n; ++r) {
      me1[r] = m[r][0];
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += m[r][k] * v[k];
      mv[r] = s;
    }
    for (int c = 0; c < n; ++c) {
      const double a_c = (ct - 1.0) * (c == 0 ? 1.0 : 0.0) - st * v[c];
      const double b_c = st * (c == 0 ? 1.0 : 0.0) + (ct - 1.0) * v[c];
      for (int r = 0; r < n; ++r) m[r][c] += me1[r] * a_c + mv[r] * b_c;
    }
    Vec s(n);
    for (int r = 0; r < n; ++r) s[r] = m[r][0];
    chain.set_spin(i, geometry::retract(s));
  }
  return chain;
}

model::SpinChain sample_free_gibbs(int n_dim, int length, double beta, Rng& rng) {
  return coords_to_spins(sample_increment_coords(n_dim, length, beta, rng));
}

void heat_bath_sweep(model::SpinChain& chain, double beta, Rng& rng) {
  const int L = chain.length(), n = chain.n_dim();
  for (int i = 0; i < L; ++i) {
    Vec m(n);
    const int l = chain.left(i), r = chain.right(i);
    if (l >= 0) m += chain.spin_vec(l);
    if (r >= 0) m += chain.spin_vec(r);
    const double mn = norm(m);
    if (mn < 1e-12) {
      chain.set_spin(i, uniform_sphere(n, rng));
      continue;
    }
    const Vec dir = (1.0 / mn) * m;
    const double kappa = beta * mn;
    if (n == 2) {
      const double t = sample_circle_angle(kappa, rng);
      Vec s(2);
      // rotate dir by t
      s[0] = std::cos(t) * dir[0] - std::sin(t) * dir[1];
      s[1] = std::sin(t) * dir[0] + std::cos(t) * dir[1];
      chain.set_spin(i, s);
    } else {
      const double t = sample_theta(n - 2, kappa, rng);
      // uniform direction orthogonal to dir
      Vec w(n);
      for (;;) {
        for (int k = 0; k < n; ++k) w[k] = rng.gaussian();
        w -= dot(w, dir) * dir;
        const double wn = norm(w);
        if (wn > 1e-8) {
          w *= 1.0 / wn;
          break;
        }
      }
      chain.set_spin(i, std::cos(t) * dir + std::sin(t) * w);
    }
  }
}

WeightedSample sample_periodic_gibbs(int n_dim, int length, double beta, Rng& rng,
                                     PeriodicMethod method, const PeriodicOptions& opts) {
  if (method == PeriodicMethod::Reweight) {
    model::SpinChain free_draw = sample_free_gibbs(n_dim, length, beta, rng);
    model::SpinChain chain(n_dim, length, model::BoundaryCondition::Periodic);
    chain.raw() = free_draw.raw();
    const double w = beta * dot(chain.spin(length - 1), chain.spin(0));
    return {std::move(chain), w};
  }
  model::SpinChain seed = sample_free_gibbs(n_dim, length, beta, rng);
  model::SpinChain chain(n_dim, length, model::BoundaryCondition::Periodic);
  chain.raw() = seed.raw();
  for (int s = 0; s < opts.mcmc_burn_in_sweeps; ++s) heat_bath_sweep(chain, beta, rng);
  return {std::move(chain), 0.0};
}

WeightedBatch sample_periodic_batch(int n_dim, int length, double beta, int n, Rng& rng,
                                    PeriodicMethod method, const PeriodicOptions& opts) {
  WeightedBatch batch;
  batch.samples.reserve(static_cast<size_t>(n));
  if (method == PeriodicMethod::Reweight) {
    for (int i = 0; i < n; ++i)
      batch.samples.push_back(sample_periodic_gibbs(n_dim, length, beta, rng, method, opts));
  } else {
    // One chain, burn-in once, then one sweep between samples.
    model::SpinChain seed = sample_free_gibbs(n_dim, length, beta, rng);
    model::SpinChain chain(n_dim, length, model::BoundaryCondition::Periodic);
    chain.raw() = seed.raw();
    for (int s = 0; s < opts.mcmc_burn_in_sweeps; ++s) heat_bath_sweep(chain, beta, rng);
    for (int i = 0; i < n; ++i) {
      heat_bath_sweep(chain, beta, rng);
      batch.samples.push_back({chain, 0.0});
    }
  }
  double max_lw = -1e300;
  for (const auto& s : batch.samples) max_lw = std::max(max_lw, s.log_weight);
  double sw = 0.0, sw2 = 0.0;
  for (const auto& s : batch.samples) {
    const double w = std::exp(s.log_weight - max_lw);
    sw += w;
    sw2 += w * w;
  }
  batch.ess = sw * sw / std::max(sw2, 1e-300);
  batch.ess_too_low = batch.ess / n < 0.01;
  return batch;
}

namespace {

// Spin i as a function of the coordinates, for finite differencing.
Vec spin_from_coords(const IncrementCoordinates& coords, int i) {
  IncrementCoordinates head;
  head.n_dim = coords.n_dim;
  head.thetas.assign(coords.thetas.begin(), coords.thetas.begin() + i + 1);
  head.axes.assign(coords.axes.begin(), coords.axes.begin() + i + 1);
  while (head.thetas.size() < 2) {  // chains need two sites; pad inertly
    head.thetas.push_back(0.0);
    head.axes.push_back(head.axes.front());
  }
  const model::SpinChain c = coords_to_spins(head);
  return c.spin_vec(i);
}

}  // namespace

DerivativeBoundsReport verify_coordinate_derivative_bounds(int n_dim, int length, Rng& rng,
                                                           int n_draws, double fd_step) {
  if (n_dim < 3) throw Error(Errc::InvalidDimension, "derivative bounds need n_dim >= 3");
  DerivativeBoundsReport rep;
  rep.n_draws = n_draws;
  const int tangent_dim = n_dim - 2;  // tangent space of the equatorial sphere
  for (int draw = 0; draw < n_draws; ++draw) {
    // beta = 1 keeps the angles generic; the bounds hold pointwise.
    IncrementCoordinates coords = sample_increment_coords(n_dim, length, 1.0, rng);
    for (int i = 0; i < length; ++i) {
      for (int j = 0; j <= i; ++j) {
        // d/dtheta_j
        {
          IncrementCoordinates p = coords, m = coords;
          p.thetas[static_cast<size_t>(j)] += fd_step;
          m.thetas[static_cast<size_t>(j)] -= fd_step;
          const Vec d = (1.0 / (2.0 * fd_step)) * (spin_from_coords(p, i) - spin_from_coords(m, i));
          rep.max_theta_norm = std::max(rep.max_theta_norm, norm(d));
        }
        // d/dv_j: operator norm over an orthonormal tangent basis at v_j.
        const Vec vj = coords.axes[static_cast<size_t>(j)];
        std::vector<Vec> basis;
        for (int k = 1; k < n_dim && static_cast<int>(basis.size()) < tangent_dim; ++k) {
          Vec h = Vec::basis(n_dim, k);
          h -= dot(h, vj) * vj;
          for (const Vec& b : basis) h -= dot(h, b) * b;
          const double hn = norm(h);
          if (hn > 1e-6) basis.push_back((1.0 / hn) * h);
        }
        std::vector<Vec> cols;
        for (const Vec& h : basis) {
          IncrementCoordinates p = coords, m = coords;
          p.axes[static_cast<size_t>(j)] = geometry::retract(vj + fd_step * h);
          m.axes[static_cast<size_t>(j)] = geometry::retract(vj - fd_step * h);
          cols.push_back((1.0 / (2.0 * fd_step)) * (spin_from_coords(p, i) - spin_from_coords(m, i)));
        }
        // Largest singular value of the n x tangent_dim Jacobian.
        const int k = static_cast<int>(cols.size());
        double op = 0.0;
        if (k == 1) {
          op = norm(cols[0]);
        } else if (k > 1) {
          std::vector<double> g(static_cast<size_t>(k) * k);
          for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) g[static_cast<size_t>(r) * k + c] = dot(cols[static_cast<size_t>(r)], cols[static_cast<size_t>(c)]);
          const auto eigs = linalg::jacobi_eigenvalues(g, k);
          op = std::sqrt(std::max(0.0, eigs.back()));
        }
        rep.max_axis_norm = std::max(rep.max_axis_norm, op);
      }
    }
  }
  rep.theta_violation = rep.max_theta_norm > 1.0 + 1e-4;
  rep.axis_violation = rep.max_axis_norm > 4.0 + 1e-4;
  return rep;
}

}  // namespace spinchain::sampling
