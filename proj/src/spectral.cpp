#include "spinchain/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "spinchain/linalg.hpp"
#include "spinchain/observables.hpp"
#include "spinchain/quadrature.hpp"

namespace spinchain::spectral {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* gap_method_name(GapMethod m) {
  switch (m) {
    case GapMethod::Autocorr: return "autocorr";
    case GapMethod::Rayleigh: return "rayleigh";
    case GapMethod::OracleMatrix: return "oracle";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Poincare constants

double poincare_c1(double a, double b) {
  if (a < 0.0 || b < 0.0) throw Error(Errc::InvalidConfig, "poincare_c1 needs a, b >= 0");
  if (b == 0.0) return kPi * kPi * 2.0 * (a + 1.0) * std::pow(4.0, a) / std::pow(kPi, a);
  const auto den = quadrature::integrate(
      [a](double x) { return std::pow(x, a) * std::exp(-0.5 * x * x); }, 0.0,
      std::sqrt(b) * kPi / 2.0, 1e-10);
  return kPi * kPi * kPi * std::pow(2.0, a) * std::pow(b, 0.5 * (a + 1.0)) / den.value;
}

double poincare_c2(int n_dim) {
  if (n_dim < 2) throw Error(Errc::InvalidDimension, "poincare_c2 needs N >= 2");
  return 1.0 / (n_dim - 1);
}

double poincare_c3(double b) {
  if (b < 0.0) throw Error(Errc::InvalidConfig, "poincare_c3 needs b >= 0");
  if (b == 0.0) return kPi * kPi / 2.0;
  const auto den = quadrature::integrate(
      [](double x) { return std::exp(-0.5 * x * x); }, -std::sqrt(b) * kPi,
      std::sqrt(b) * kPi, 1e-10);
  return kPi * kPi * kPi * std::sqrt(b) / den.value;
}

// ---------------------------------------------------------------------------
// Poincare verification

double TrigPoly::value(double t) const {
  double s = a0;
  for (size_t k = 0; k < ac.size(); ++k) {
    const double kt = static_cast<double>(k + 1) * t;
    s += ac[k] * std::cos(kt) + bs[k] * std::sin(kt);
  }
  return s;
}

double TrigPoly::deriv(double t) const {
  double s = 0.0;
  for (size_t k = 0; k < ac.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    s += kk * (-ac[k] * std::sin(kk * t) + bs[k] * std::cos(kk * t));
  }
  return s;
}

TrigPoly TrigPoly::random(int degree, Rng& rng) {
  TrigPoly f;
  f.a0 = rng.uniform(-1.0, 1.0);
  f.ac.resize(static_cast<size_t>(degree));
  f.bs.resize(static_cast<size_t>(degree));
  for (int k = 0; k < degree; ++k) {
    f.ac[static_cast<size_t>(k)] = rng.uniform(-1.0, 1.0);
    f.bs[static_cast<size_t>(k)] = rng.uniform(-1.0, 1.0);
  }
  return f;
}

namespace {

PoincareReport verify_by_quadrature(double constant, std::span<const TrigPoly> fs, double lo,
                                    double hi, const std::function<double(double)>& weight,
                                    double rel_tol) {
  PoincareReport rep;
  rep.constant = constant;
  const double z = quadrature::integrate(weight, lo, hi, rel_tol).value;
  for (const auto& f : fs) {
    const double mean = quadrature::integrate(
                            [&](double t) { return f.value(t) * weight(t); }, lo, hi, rel_tol)
                            .value / z;
    const double var = quadrature::integrate(
                           [&](double t) {
                             const double d = f.value(t) - mean;
                             return d * d * weight(t);
                           },
                           lo, hi, rel_tol)
                           .value / z;
    const double dirichlet = quadrature::integrate(
                                 [&](double t) {
                                   const double d = f.deriv(t);
                                   return d * d * weight(t);
                                 },
                                 lo, hi, rel_tol)
                                 .value / z;
    if (dirichlet < 1e-14) {
      ++rep.n_skipped;
      continue;
    }
    rep.max_ratio = std::max(rep.max_ratio, var / dirichlet);
    ++rep.n_tested;
  }
  rep.pass = rep.max_ratio <= constant * (1.0 + 1e-9);
  return rep;
}

}  // namespace

PoincareReport verify_poincare_interval(double a, double b, std::span<const TrigPoly> fs,
                                        double rel_tol) {
  return verify_by_quadrature(
      poincare_c1(a, b), fs, 0.0, kPi,
      [a, b](double t) { return std::pow(std::sin(t), a) * std::exp(b * std::cos(t)); }, rel_tol);
}

PoincareReport verify_poincare_circle(double b, std::span<const TrigPoly> fs, double rel_tol) {
  return verify_by_quadrature(poincare_c3(b), fs, -kPi, kPi,
                              [b](double t) { return std::exp(b * std::cos(t)); }, rel_tol);
}

PoincareReport verify_poincare_sphere(int n_dim, int n_funcs, int n_samples, Rng& rng) {
  PoincareReport rep;
  rep.constant = poincare_c2(n_dim);
  rep.pass = true;
  const int n_groups = 20;
  for (int fi = 0; fi < n_funcs; ++fi) {
    const Vec u = sampling::uniform_sphere(n_dim, rng);
    const Vec w = sampling::uniform_sphere(n_dim, rng);
    // Random quadratic polynomial; the first draw per dimension is the pure
    // linear extremizer, for which the inequality is tight.
    double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
    double cq = rng.uniform(-1.0, 1.0), dq = rng.uniform(-1.0, 1.0);
    if (fi == 0) {
      a = 1.0;
      b = cq = dq = 0.0;
    }
    const auto fval = [&](const Vec& x) {
      const double ux = dot(u, x), wx = dot(w, x);
      return a * ux + b * wx + cq * ux * wx + dq * ux * ux;
    };
    const auto gradsq = [&](const Vec& x) {
      const double ux = dot(u, x), wx = dot(w, x);
      Vec g = a * u + b * w + cq * (wx * u + ux * w) + (2.0 * dq * ux) * u;
      g -= dot(g, x) * x;
      return norm_sq(g);
    };
    // Group-wise means give a stderr for the defect Var - c2 * Dirichlet.
    std::vector<double> fsum(n_groups, 0.0), f2sum(n_groups, 0.0), gsum(n_groups, 0.0);
    const int per = n_samples / n_groups;
    for (int g = 0; g < n_groups; ++g) {
      for (int s = 0; s < per; ++s) {
        const Vec x = sampling::uniform_sphere(n_dim, rng);
        const double v = fval(x);
        fsum[g] += v;
        f2sum[g] += v * v;
        gsum[g] += gradsq(x);
      }
    }
    double fbar = 0.0, f2bar = 0.0, gbar = 0.0;
    for (int g = 0; g < n_groups; ++g) {
      fbar += fsum[g];
      f2bar += f2sum[g];
      gbar += gsum[g];
    }
    const double n_tot = static_cast<double>(per) * n_groups;
    fbar /= n_tot;
    f2bar /= n_tot;
    gbar /= n_tot;
    const double var = f2bar - fbar * fbar;
    if (gbar < 1e-12) {
      ++rep.n_skipped;
      continue;
    }
    std::vector<double> defect(n_groups, 0.0);
    for (int g = 0; g < n_groups; ++g) {
      const double m = fsum[g] / per, m2 = f2sum[g] / per, gd = gsum[g] / per;
      defect[g] = (m2 - m * m) - rep.constant * gd;
    }
    const double dbar = stats::mean(defect);
    const double dse = std::sqrt(stats::variance(defect) / n_groups);
    rep.max_ratio = std::max(rep.max_ratio, var / gbar);
    ++rep.n_tested;
    if (dbar > 3.0 * dse) rep.pass = false;
  }
  return rep;
}

TensorizedCheck verify_tensorized_bound(int n_dim, double beta, int n_funcs, Rng& rng) {
  if (n_dim < 3) throw Error(Errc::InvalidDimension, "tensorized bound needs N >= 3");
  TensorizedCheck check;
  const double a = n_dim - 2;
  const double c_theta = poincare_c1(a, beta);
  // Poincare constant of the equatorial sphere S^{N-2}.
  const double c_eq = 1.0 / (n_dim - 2);
  const auto weight = [a, beta](double t) {
    return std::pow(std::sin(t), a) * std::exp(beta * std::cos(t));
  };
  const double z = quadrature::integrate(weight, 0.0, kPi, 1e-10).value;
  const auto expect = [&](const std::function<double(double)>& g) {
    return quadrature::integrate([&](double t) { return g(t) * weight(t); }, 0.0, kPi, 1e-10)
               .value / z;
  };
  const double inv_ambient = 1.0 / (n_dim - 1);  // E[(u.v)^2] on S^{N-2} in R^{N-1}
  for (int fi = 0; fi < n_funcs; ++fi) {
    const TrigPoly g1 = TrigPoly::random(4, rng);
    const TrigPoly g2 = TrigPoly::random(4, rng);
    const double e_g1 = expect([&](double t) { return g1.value(t); });
    const double var_g1 = expect([&](double t) {
      const double d = g1.value(t) - e_g1;
      return d * d;
    });
    const double e_g2sq = expect([&](double t) { return g2.value(t) * g2.value(t); });
    const double e_dg1sq = expect([&](double t) { return g1.deriv(t) * g1.deriv(t); });
    const double e_dg2sq = expect([&](double t) { return g2.deriv(t) * g2.deriv(t); });
    // f(theta, v) = g1(theta) + g2(theta) (u . v), u a unit equatorial vector
    const double lhs = var_g1 + e_g2sq * inv_ambient;
    const double rhs = c_eq * e_g2sq * (1.0 - inv_ambient) + c_theta * (e_dg1sq + e_dg2sq * inv_ambient);
    if (rhs < 1e-14) continue;
    check.max_ratio = std::max(check.max_ratio, lhs / rhs);
    ++check.n_tested;
  }
  check.pass = check.max_ratio <= 1.0 + 1e-9;
  return check;
}

// ---------------------------------------------------------------------------
// Grid oracle for the XY chain

namespace {

// Reversible nearest-neighbor walk on the M-point angle grid per site with
// the exponential rule: rate (1/h^2) e^{-beta dH / 2} per move. Detailed
// balance against the discrete Gibbs weights is exact at every M, and the
// weak error is O(h^2) (the Metropolis min-rule kink would cost O(h)).
// After symmetrization the off-diagonal entries are identically 1 and the
// diagonal carries the state dependence. Eigenvalues are of the beta-scaled
// generator; the physical gap divides by beta.
class XyGridOperator {
 public:
  XyGridOperator(int length, double beta, int grid, model::BoundaryCondition bc)
      : L_(length), M_(grid), beta_(beta), bc_(bc) {
    double states = 1.0;
    for (int i = 0; i < L_; ++i) states *= M_;
    if (states > 2e6) throw Error(Errc::StateSpaceTooLarge, "M^L exceeds 2e6 grid states");
    n_ = static_cast<size_t>(states);
    cos_.resize(static_cast<size_t>(M_));
    for (int d = 0; d < M_; ++d) cos_[static_cast<size_t>(d)] = std::cos(2.0 * kPi * d / M_);
    strides_.resize(static_cast<size_t>(L_));
    size_t s = 1;
    for (int j = 0; j < L_; ++j) {
      strides_[static_cast<size_t>(j)] = s;
      s *= static_cast<size_t>(M_);
    }
    build_tables();
    build_diag_and_weights();
  }

  size_t size() const { return n_; }
  const std::vector<double>& sqrt_weights() const { return q_; }

  // Symmetrized off-diagonals are identically 1, so the action is a plain
  // periodic 2L-neighbor stencil plus the precomputed diagonal.
  void apply(const std::vector<double>& v, std::vector<double>& y) const {
    std::vector<int> k(static_cast<size_t>(L_), 0);
    for (size_t idx = 0; idx < n_; ++idx) {
      double acc = diag_[idx] * v[idx];
      for (int j = 0; j < L_; ++j) {
        const int kj = k[static_cast<size_t>(j)];
        const size_t str = strides_[static_cast<size_t>(j)];
        const size_t up = kj + 1 < M_ ? idx + str : idx - str * static_cast<size_t>(M_ - 1);
        const size_t dn = kj > 0 ? idx - str : idx + str * static_cast<size_t>(M_ - 1);
        acc += v[up] + v[dn];
      }
      y[idx] = acc;
      // odometer
      for (int j = 0; j < L_; ++j) {
        if (++k[static_cast<size_t>(j)] < M_) break;
        k[static_cast<size_t>(j)] = 0;
      }
    }
  }

  // Scaled gap: -lambda_2 / h^2 where lambda_2 is the top eigenvalue of the
  // operator restricted to the complement of the stationary direction.
  double scaled_gap() const {
    const double h = 2.0 * kPi / M_;
    const double lambda = top_deflated_eigenvalue();
    return -lambda / (h * h);
  }

  double stationary_expectation_s1s2() const {
    std::vector<int> k(static_cast<size_t>(L_), 0);
    double num = 0.0, den = 0.0;
    for (size_t idx = 0; idx < n_; ++idx) {
      const double w = q_[idx] * q_[idx];
      const int d = mod(k[1] - k[0]);
      num += w * cos_[static_cast<size_t>(d)];
      den += w;
      for (int j = 0; j < L_; ++j) {
        if (++k[static_cast<size_t>(j)] < M_) break;
        k[static_cast<size_t>(j)] = 0;
      }
    }
    return num / den;
  }

 private:
  int mod(int d) const { return d >= 0 ? d % M_ : (d % M_ + M_) % M_; }

  bool has_left(int j) const { return j > 0 || bc_ == model::BoundaryCondition::Periodic; }
  bool has_right(int j) const { return j < L_ - 1 || bc_ == model::BoundaryCondition::Periodic; }

  std::pair<int, int> bond_offsets(const std::vector<int>& k, int j) const {
    const int kl = has_left(j) ? k[static_cast<size_t>((j + L_ - 1) % L_)] : 0;
    const int kr = has_right(j) ? k[static_cast<size_t>((j + 1) % L_)] : 0;
    const int kj = k[static_cast<size_t>(j)];
    return {mod(kj - kl), mod(kr - kj)};
  }

  // dH for moving site j by +1 grid step given increments (dl, dr); by
  // symmetry the -1 move swaps the roles of the two increments.
  double delta_h(int dl, int dr, bool left, bool right, int dir) const {
    double dh = 0.0;
    if (dir > 0) {
      if (left) dh += cos_[static_cast<size_t>(dl)] - cos_[static_cast<size_t>(mod(dl + 1))];
      if (right) dh += cos_[static_cast<size_t>(dr)] - cos_[static_cast<size_t>(mod(dr - 1))];
    } else {
      if (left) dh += cos_[static_cast<size_t>(dl)] - cos_[static_cast<size_t>(mod(dl - 1))];
      if (right) dh += cos_[static_cast<size_t>(dr)] - cos_[static_cast<size_t>(mod(dr + 1))];
    }
    return dh;
  }

  void build_tables() {
    // Exit-rate tables e^{-beta dH / 2}: interior (two-bond) moves over
    // (dl, dr), single-bond edge moves over one increment.
    rate2_p_.resize(static_cast<size_t>(M_) * M_);
    rate2_m_.resize(static_cast<size_t>(M_) * M_);
    rate1l_p_.resize(static_cast<size_t>(M_));
    rate1l_m_.resize(static_cast<size_t>(M_));
    rate1r_p_.resize(static_cast<size_t>(M_));
    rate1r_m_.resize(static_cast<size_t>(M_));
    for (int dl = 0; dl < M_; ++dl) {
      for (int dr = 0; dr < M_; ++dr) {
        rate2_p_[static_cast<size_t>(dl) * M_ + dr] =
            std::exp(-0.5 * beta_ * delta_h(dl, dr, true, true, +1));
        rate2_m_[static_cast<size_t>(dl) * M_ + dr] =
            std::exp(-0.5 * beta_ * delta_h(dl, dr, true, true, -1));
      }
      rate1l_p_[static_cast<size_t>(dl)] = std::exp(-0.5 * beta_ * delta_h(dl, 0, true, false, +1));
      rate1l_m_[static_cast<size_t>(dl)] = std::exp(-0.5 * beta_ * delta_h(dl, 0, true, false, -1));
      rate1r_p_[static_cast<size_t>(dl)] = std::exp(-0.5 * beta_ * delta_h(0, dl, false, true, +1));
      rate1r_m_[static_cast<size_t>(dl)] = std::exp(-0.5 * beta_ * delta_h(0, dl, false, true, -1));
    }
  }

  double rate_entry(int j, int dl, int dr, int dir) const {
    const bool l = has_left(j), r = has_right(j);
    if (l && r) return dir > 0 ? rate2_p_[static_cast<size_t>(dl) * M_ + dr] : rate2_m_[static_cast<size_t>(dl) * M_ + dr];
    if (l) return dir > 0 ? rate1l_p_[static_cast<size_t>(dl)] : rate1l_m_[static_cast<size_t>(dl)];
    return dir > 0 ? rate1r_p_[static_cast<size_t>(dr)] : rate1r_m_[static_cast<size_t>(dr)];
  }

  void build_diag_and_weights() {
    diag_.resize(n_);
    q_.resize(n_);
    std::vector<int> k(static_cast<size_t>(L_), 0);
    double qn = 0.0;
    for (size_t idx = 0; idx < n_; ++idx) {
      double d = 0.0;
      for (int j = 0; j < L_; ++j) {
        const auto [dl, dr] = bond_offsets(k, j);
        d -= rate_entry(j, dl, dr, +1);
        d -= rate_entry(j, dl, dr, -1);
      }
      diag_[idx] = d;
      double energy = 0.0;
      const int bonds = bc_ == model::BoundaryCondition::Periodic ? L_ : L_ - 1;
      for (int b = 0; b < bonds; ++b) {
        const int dd = mod(k[static_cast<size_t>((b + 1) % L_)] - k[static_cast<size_t>(b)]);
        energy -= cos_[static_cast<size_t>(dd)];
      }
      q_[idx] = std::exp(-0.5 * beta_ * (energy + L_));  // shifted for range
      qn += q_[idx] * q_[idx];
      for (int j = 0; j < L_; ++j) {
        if (++k[static_cast<size_t>(j)] < M_) break;
        k[static_cast<size_t>(j)] = 0;
      }
    }
    qn = 1.0 / std::sqrt(qn);
    for (double& x : q_) x *= qn;
  }

  // Restarted Lanczos with full reorthogonalization, deflating the known
  // stationary direction q. Returns the top eigenvalue on q-perp.
  double top_deflated_eigenvalue() const {
    const int m_max = 30;
    const int max_cycles = 600;
    std::vector<std::vector<double>> basis;
    std::vector<double> v(n_), w(n_);
    Rng rng(0x5eed5eedULL);
    for (size_t i = 0; i < n_; ++i) v[i] = rng.uniform(-1.0, 1.0);
    auto orth_q = [&](std::vector<double>& x) {
      double c = 0.0;
      for (size_t i = 0; i < n_; ++i) c += x[i] * q_[i];
      for (size_t i = 0; i < n_; ++i) x[i] -= c * q_[i];
    };
    auto normalize = [&](std::vector<double>& x) {
      double s = 0.0;
      for (double t : x) s += t * t;
      s = std::sqrt(s);
      if (s < 1e-300) throw Error(Errc::NotConverged, "lanczos basis collapsed");
      for (double& t : x) t /= s;
      return s;
    };
    orth_q(v);
    normalize(v);
    double theta_prev = 1e300;
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
      basis.clear();
      basis.push_back(v);
      std::vector<double> proj(static_cast<size_t>(m_max) * m_max, 0.0);
      int processed = 0;
      for (int j = 0; j < m_max - 1; ++j) {
        apply(basis[static_cast<size_t>(j)], w);
        // two-pass Gram-Schmidt against q and the current basis; the summed
        // removal coefficients are exactly v_i . A v_j
        for (int pass = 0; pass < 2; ++pass) {
          orth_q(w);
          for (int i = 0; i <= j; ++i) {
            double c = 0.0;
            const auto& u = basis[static_cast<size_t>(i)];
            for (size_t t = 0; t < n_; ++t) c += w[t] * u[t];
            proj[static_cast<size_t>(i) * m_max + j] += c;
            for (size_t t = 0; t < n_; ++t) w[t] -= c * u[t];
          }
        }
        processed = j + 1;
        double nw = 0.0;
        for (double t : w) nw += t * t;
        nw = std::sqrt(nw);
        if (nw < 1e-12) break;
        proj[static_cast<size_t>(j + 1) * m_max + j] = nw;
        for (double& t : w) t /= nw;
        basis.push_back(w);
      }
      // Projected matrix on the span of the processed columns; entries below
      // the first subdiagonal vanish by construction.
      const int dim = processed;
      std::vector<double> small(static_cast<size_t>(dim) * dim, 0.0);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          double v_ij;
          if (std::abs(i - j) == 1) {
            // exact subdiagonal norm, stored at (max, min)
            v_ij = proj[static_cast<size_t>(std::max(i, j)) * m_max + std::min(i, j)];
          } else {
            v_ij = i <= j ? proj[static_cast<size_t>(i) * m_max + j]
                          : proj[static_cast<size_t>(j) * m_max + i];
          }
          small[static_cast<size_t>(i) * dim + j] = v_ij;
        }
      std::vector<double> eigs;
      std::vector<std::vector<double>> vecs;
      linalg::jacobi_eigen(std::move(small), dim, eigs, vecs);
      const double theta = eigs.back();
      const auto& y = vecs.back();
      std::fill(v.begin(), v.end(), 0.0);
      for (int i = 0; i < dim; ++i) {
        const double c = y[static_cast<size_t>(i)];
        const auto& u = basis[static_cast<size_t>(i)];
        for (size_t t = 0; t < n_; ++t) v[t] += c * u[t];
      }
      orth_q(v);
      normalize(v);
      // explicit residual
      apply(v, w);
      double res = 0.0;
      for (size_t t = 0; t < n_; ++t) {
        const double r = w[t] - theta * v[t];
        res += r * r;
      }
      res = std::sqrt(res);
      if (res < 1e-10 ||
          (cycle > 2 && std::abs(theta - theta_prev) < 1e-13 * std::max(1.0, std::abs(theta))))
        return theta;
      theta_prev = theta;
    }
    return theta_prev;
  }

  int L_, M_;
  double beta_;
  model::BoundaryCondition bc_;
  size_t n_ = 0;
  std::vector<double> cos_;
  std::vector<size_t> strides_;
  std::vector<double> diag_, q_;
  std::vector<double> rate2_p_, rate2_m_;
  std::vector<double> rate1l_p_, rate1l_m_;
  std::vector<double> rate1r_p_, rate1r_m_;
};

}  // namespace

double gap_oracle_xy_single(int length, double beta, int grid_size, model::BoundaryCondition bc) {
  const XyGridOperator op(length, beta, grid_size, bc);
  const double scaled = op.scaled_gap();
  return beta > 0.0 ? scaled / beta : scaled;
}

double xy_gibbs_expectation_s1s2(int length, double beta, int grid_size,
                                 model::BoundaryCondition bc) {
  const XyGridOperator op(length, beta, grid_size, bc);
  return op.stationary_expectation_s1s2();
}

GapEstimate gap_oracle_xy(int length, double beta, int grid_size, model::BoundaryCondition bc) {
  if (grid_size % 2 != 0) throw Error(Errc::InvalidConfig, "grid_size must be even");
  const double g_fine = gap_oracle_xy_single(length, beta, grid_size, bc);
  const double g_half = gap_oracle_xy_single(length, beta, grid_size / 2, bc);
  // second-order rates: halving the mesh quarters the error
  const double extrap = (4.0 * g_fine - g_half) / 3.0;
  const double delta = std::abs(g_fine - g_half);
  GapEstimate est;
  est.value = extrap;
  est.method = GapMethod::OracleMatrix;
  est.ci = {extrap - delta, extrap + delta};
  est.n_dim = 2;
  est.length = length;
  est.beta = beta;
  est.bc = bc;
  return est;
}

// ---------------------------------------------------------------------------
// Autocorrelation route

namespace {

// Average of precomputed per-replica autocovariance curves.
std::vector<double> pooled_curve(const std::vector<std::vector<double>>& curves,
                                 std::span<const size_t> which) {
  std::vector<double> acc(curves[0].size(), 0.0);
  for (size_t r : which)
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += curves[r][i];
  for (double& x : acc) x /= static_cast<double>(which.size());
  return acc;
}

}  // namespace

GapEstimate gap_estimate_autocorr(const std::vector<std::vector<double>>& replica_series,
                                  double dt_record, int n_dim, int length, double beta,
                                  model::BoundaryCondition bc, uint64_t bootstrap_seed) {
  const size_t R = replica_series.size();
  if (R < 20) throw Error(Errc::SeriesTooShort, "need at least 20 independent replicas");
  size_t shortest = replica_series[0].size();
  for (const auto& s : replica_series) shortest = std::min(shortest, s.size());
  if (shortest < 64) throw Error(Errc::SeriesTooShort, "replica series too short");
  double grand = 0.0;
  size_t count = 0;
  for (const auto& s : replica_series) {
    for (double x : s) grand += x;
    count += s.size();
  }
  grand /= static_cast<double>(count);
  std::vector<size_t> all(R);
  for (size_t i = 0; i < R; ++i) all[i] = i;
  // Per-replica curves about the grand mean, computed once; the lag window
  // grows until the pooled curve decays below the fit window.
  int max_lag = 64;
  std::vector<std::vector<double>> curves;
  std::vector<double> pooled;
  for (;;) {
    curves.clear();
    for (const auto& s : replica_series) curves.push_back(stats::autocovariance(s, max_lag, grand));
    pooled = pooled_curve(curves, all);
    if (pooled[static_cast<size_t>(max_lag)] < 0.12 * pooled[0] ||
        max_lag >= static_cast<int>(shortest) / 3)
      break;
    max_lag *= 2;
  }
  const double tau_rec = observables::exp_tail_tau(pooled);
  GapEstimate est;
  est.value = 1.0 / (tau_rec * dt_record);
  est.method = GapMethod::Autocorr;
  est.n_dim = n_dim;
  est.length = length;
  est.beta = beta;
  est.bc = bc;
  // bootstrap over replicas, reusing the per-replica curves
  Rng rng(bootstrap_seed);
  std::vector<double> gaps;
  for (int b = 0; b < 200; ++b) {
    std::vector<size_t> pick(R);
    for (size_t i = 0; i < R; ++i) pick[i] = static_cast<size_t>(rng.next_u64() % R);
    try {
      gaps.push_back(1.0 / (observables::exp_tail_tau(pooled_curve(curves, pick)) * dt_record));
    } catch (const Error&) {
    }
  }
  if (gaps.size() >= 20) {
    std::sort(gaps.begin(), gaps.end());
    est.ci = {gaps[gaps.size() / 40], gaps[gaps.size() - 1 - gaps.size() / 40]};
    est.ci.lo = std::min(est.ci.lo, est.value);
    est.ci.hi = std::max(est.ci.hi, est.value);
  } else {
    est.ci = {est.value * 0.5, est.value * 2.0};
  }
  // halves consistency
  const size_t half = R / 2;
  std::vector<size_t> first(all.begin(), all.begin() + static_cast<long>(half));
  std::vector<size_t> second(all.begin() + static_cast<long>(half), all.end());
  const auto tau_of = [&](std::span<const size_t> idx) {
    return observables::exp_tail_tau(pooled_curve(curves, idx));
  };
  const auto sigma_of = [&](std::span<const size_t> idx) {
    std::vector<double> taus;
    for (int b = 0; b < 60; ++b) {
      std::vector<size_t> pick(idx.size());
      for (size_t i = 0; i < idx.size(); ++i)
        pick[i] = idx[static_cast<size_t>(rng.next_u64() % idx.size())];
      try {
        taus.push_back(observables::exp_tail_tau(pooled_curve(curves, pick)));
      } catch (const Error&) {
      }
    }
    if (taus.size() < 8) return 0.0;
    return std::sqrt(stats::variance(taus));
  };
  const double t1 = tau_of(first), t2 = tau_of(second);
  const double s1 = sigma_of(first), s2 = sigma_of(second);
  const double sigma = std::sqrt(s1 * s1 + s2 * s2);
  if (sigma > 0.0 && std::abs(t1 - t2) > 2.0 * sigma &&
      std::abs(t1 - t2) > 0.25 * (t1 + t2))
    throw Error(Errc::NotConverged, "half-sample fits disagree beyond 2 sigma");
  return est;
}

// ---------------------------------------------------------------------------
// Rayleigh quotients and the bottleneck event ratio

RayleighBound rayleigh_upper_bound_gap(const SmoothObservable& f,
                                       std::span<const sampling::WeightedSample> samples,
                                       double beta) {
  if (samples.empty()) throw Error(Errc::InvalidConfig, "no samples");
  double max_lw = -1e300;
  for (const auto& s : samples) max_lw = std::max(max_lw, s.log_weight);
  const size_t n = samples.size();
  std::vector<double> w(n), fv(n), dir(n);
  for (size_t i = 0; i < n; ++i) {
    w[i] = std::exp(samples[i].log_weight - max_lw);
    fv[i] = f.value(samples[i].chain);
    double g = 0.0;
    for (int site = 0; site < samples[i].chain.length(); ++site)
      g += norm_sq(f.site_grad(samples[i].chain, site));
    dir[i] = g;
  }
  const auto quotient = [&](size_t lo, size_t hi, bool skip) {
    double sw = 0.0, swf = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (skip && i >= lo && i < hi) continue;
      sw += w[i];
      swf += w[i] * fv[i];
    }
    const double mean = swf / sw;
    double var = 0.0, dsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (skip && i >= lo && i < hi) continue;
      var += w[i] * (fv[i] - mean) * (fv[i] - mean);
      dsum += w[i] * dir[i];
    }
    var /= sw;
    dsum /= sw;
    if (var < 1e-14) throw Error(Errc::DegenerateSeries, "observable variance is zero");
    return dsum / var;
  };
  const double q_all = quotient(0, 0, false);
  // jackknife over 50 blocks
  const int blocks = 50;
  std::vector<double> jk;
  const size_t bs = n / blocks;
  if (bs > 0) {
    for (int b = 0; b < blocks; ++b) {
      try {
        jk.push_back(quotient(static_cast<size_t>(b) * bs, static_cast<size_t>(b + 1) * bs, true));
      } catch (const Error&) {
      }
    }
  }
  double se = 0.0;
  if (jk.size() > 5) {
    const double jm = stats::mean(jk);
    double s = 0.0;
    for (double x : jk) s += (x - jm) * (x - jm);
    se = std::sqrt(s * (jk.size() - 1) / jk.size());
  }
  const double scale = beta > 0.0 ? 1.0 / beta : 1.0;
  return {scale * q_all, scale * se};
}

SmoothObservable bottleneck_observable(double delta) {
  // C-infinity ramp: 0 on [0, delta/2], 1 on [delta, inf).
  const auto ramp = [delta](double r) {
    const double u = (r - 0.5 * delta) / (0.5 * delta);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
  };
  const auto ramp_deriv = [delta, ramp](double r) {
    const double h = 1e-6;
    return (ramp(r + h) - ramp(r - h)) / (2.0 * h);
  };
  SmoothObservable f;
  f.value = [delta, ramp](const model::SpinChain& chain) {
    int wnum;
    try {
      wnum = observables::winding_number(chain);
    } catch (const Error&) {
      return 0.0;  // on the cut the ramp factor vanishes anyway
    }
    if (wnum != 0) return 0.0;
    const int L = chain.length();
    double prod = 1.0;
    for (int i = 0; i < L; ++i) {
      const auto a = chain.spin(i), b = chain.spin((i + 1) % L);
      const double ang = std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]);
      prod *= ramp(kPi - std::abs(ang));
      if (prod == 0.0) break;
    }
    return prod;
  };
  f.site_grad = [delta, ramp, ramp_deriv](const model::SpinChain& chain, int site) {
    Vec g(2);
    int wnum;
    try {
      wnum = observables::winding_number(chain);
    } catch (const Error&) {
      return g;
    }
    if (wnum != 0) return g;
    const int L = chain.length();
    std::vector<double> ang(static_cast<size_t>(L)), fac(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) {
      const auto a = chain.spin(i), b = chain.spin((i + 1) % L);
      ang[static_cast<size_t>(i)] = std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]);
      fac[static_cast<size_t>(i)] = ramp(kPi - std::abs(ang[static_cast<size_t>(i)]));
    }
    // d f / d x_site: bonds (site-1, site) and (site, site+1)
    double df = 0.0;
    for (int which = 0; which < 2; ++which) {
      const int b = which == 0 ? (site + L - 1) % L : site;
      const double sgn_increment = which == 0 ? 1.0 : -1.0;  // d ang_b / d x_site
      double rest = 1.0;
      for (int i = 0; i < L; ++i)
        if (i != b) rest *= fac[static_cast<size_t>(i)];
      const double r = kPi - std::abs(ang[static_cast<size_t>(b)]);
      const double dr = -((ang[static_cast<size_t>(b)] >= 0.0) ? 1.0 : -1.0) * sgn_increment;
      df += rest * ramp_deriv(r) * dr;
    }
    const auto s = chain.spin(site);
    g[0] = -df * s[1];
    g[1] = df * s[0];
    return g;
  };
  return f;
}

BottleneckRatioResult bottleneck_ratio(std::span<const sampling::WeightedSample> samples,
                                       double delta, uint64_t bootstrap_seed) {
  if (samples.empty()) throw Error(Errc::InvalidConfig, "no samples");
  BottleneckRatioResult res;
  res.delta = delta;
  const size_t n = samples.size();
  double max_lw = -1e300;
  for (const auto& s : samples) max_lw = std::max(max_lw, s.log_weight);
  std::vector<double> w(n);
  std::vector<uint8_t> inA(n, 0), inB(n, 0), inB0(n, 0), inB1(n, 0);
  for (size_t i = 0; i < n; ++i) {
    w[i] = std::exp(samples[i].log_weight - max_lw);
    try {
      const auto ev = observables::classify_bottleneck(samples[i].chain, delta);
      inA[i] = ev.in_A_delta;
      inB[i] = ev.in_B;
      inB0[i] = ev.in_B0;
      inB1[i] = ev.in_B1;
      res.hits_A += ev.in_A_delta;
      res.hits_B0 += ev.in_B0;
      res.hits_B1 += ev.in_B1;
    } catch (const Error&) {
      // configurations on the cut have measure zero; count as outside B
    }
  }
  const auto probs = [&](size_t lo, size_t hi, bool skip) {
    double sw = 0.0, a = 0.0, bma = 0.0, bc = 0.0, b0 = 0.0, b1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (skip && i >= lo && i < hi) continue;
      sw += w[i];
      if (inA[i]) a += w[i];
      if (inB[i] && !inA[i]) bma += w[i];
      if (!inB[i]) bc += w[i];
      if (inB0[i]) b0 += w[i];
      if (inB1[i]) b1 += w[i];
    }
    return std::array<double, 6>{sw, a / sw, bma / sw, bc / sw, b0 / sw, b1 / sw};
  };
  const auto all = probs(0, 0, false);
  res.p_A = all[1];
  res.p_B_minus_A = all[2];
  res.p_Bc = all[3];
  res.p_B0 = all[4];
  res.p_B1 = all[5];
  res.censored = res.hits_A < 10;
  const double denom = res.p_B_minus_A * res.p_Bc;
  res.ratio = denom > 0.0 ? res.p_A / denom : 0.0;
  if (res.censored) {
    // Poisson 95% upper bound on the A-rate with the observed hit count.
    double wsum = 0.0, wmax = 0.0;
    for (double x : w) {
      wsum += x;
      wmax = std::max(wmax, x);
    }
    const double lam_ub = res.hits_A + 3.0;
    const double p_A_ub = lam_ub * wmax / wsum;
    res.ratio_upper = denom > 0.0 ? p_A_ub / denom : 0.0;
  }
  // jackknife CI on log-ratio
  const int blocks = 50;
  const size_t bs = n / blocks;
  std::vector<double> jk;
  if (bs > 0 && !res.censored) {
    for (int b = 0; b < blocks; ++b) {
      const auto p = probs(static_cast<size_t>(b) * bs, static_cast<size_t>(b + 1) * bs, true);
      const double d = p[2] * p[3];
      if (p[1] > 0.0 && d > 0.0) jk.push_back(std::log(p[1] / d));
    }
  }
  if (jk.size() > 5) {
    const double jm = stats::mean(jk);
    double s = 0.0;
    for (double x : jk) s += (x - jm) * (x - jm);
    const double se = std::sqrt(s * (jk.size() - 1) / jk.size());
    res.ci = {std::exp(std::log(std::max(res.ratio, 1e-300)) - 2.0 * se),
              std::exp(std::log(std::max(res.ratio, 1e-300)) + 2.0 * se)};
  } else {
    res.ci = {res.ratio, res.ratio};
  }
  (void)bootstrap_seed;
  return res;
}

}  // namespace spinchain::spectral
