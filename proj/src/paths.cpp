#include "spinchain/paths.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "spinchain/geometry.hpp"
#include "spinchain/linalg.hpp"

namespace spinchain::paths {

namespace {
constexpr double kPi = 3.14159265358979323846;

Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c[0] = a[1] * b[2] - a[2] * b[1];
  c[1] = a[2] * b[0] - a[0] * b[2];
  c[2] = a[0] * b[1] - a[1] * b[0];
  return c;
}

void require_n3(const model::SpinChain& chain, const char* what) {
  if (chain.n_dim() != 3) throw Error(Errc::InvalidDimension, std::string(what) + " needs N = 3");
}
}  // namespace

Vec pulling_flow(const Vec& s, const Vec& s_prime, double t) {
  const double c = std::clamp(dot(s, s_prime), -1.0, 1.0);
  if (c < -1.0 + 1e-9) throw Error(Errc::AntipodalStart, "flow start is antipodal to the target");
  const double d = std::sqrt(std::max(0.0, 1.0 - c * c));
  if (d < 1e-12) return s;  // already at the attracting pole
  Vec s_tilde = s_prime - c * s;
  s_tilde *= 1.0 / d;
  const double shifted = t + std::atanh(c);
  return geometry::retract(std::tanh(shifted) * s + (1.0 / std::cosh(shifted)) * s_tilde);
}

HemispherePullReport verify_hemisphere_pulling(const model::SpinChain& chain, const Vec& s,
                                               std::span<const double> t_grid) {
  for (int i = 0; i < chain.length(); ++i)
    if (!(dot(chain.spin_vec(i), s) > 0.0))
      throw Error(Errc::HemisphereViolated,
                  "spin " + std::to_string(i) + " is not strictly inside the hemisphere");
  HemispherePullReport rep;
  double prev = 0.0;
  bool first = true;
  rep.min_step_decrease = 1e300;
  for (double t : t_grid) {
    model::SpinChain flowed(chain.n_dim(), chain.length(), chain.bc());
    for (int i = 0; i < chain.length(); ++i)
      flowed.set_spin(i, pulling_flow(s, chain.spin_vec(i), t));
    const double e = model::energy(flowed);
    if (!first) {
      rep.min_step_decrease = std::min(rep.min_step_decrease, prev - e);
      rep.max_energy_rise = std::max(rep.max_energy_rise, e - prev);
    }
    prev = e;
    first = false;
  }
  rep.monotone = rep.max_energy_rise <= 1e-9;
  return rep;
}

SphereCover build_cover(double epsilon) {
  if (!(epsilon > 0.0) || epsilon > std::sin(kPi / 16.0))
    throw Error(Errc::InvalidConfig, "cover epsilon must lie in (0, sin(pi/16)]");
  const int m = static_cast<int>(std::ceil(4.0 / epsilon));
  std::vector<std::array<double, 3>> pts;
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign = -1; sign <= 1; sign += 2) {
      for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= m; ++j) {
          double p[3];
          p[axis] = sign;
          p[(axis + 1) % 3] = -1.0 + 2.0 * i / m;
          p[(axis + 2) % 3] = -1.0 + 2.0 * j / m;
          const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
          pts.push_back({p[0] / r, p[1] / r, p[2] / r});
        }
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  SphereCover cover;
  cover.epsilon = epsilon;
  cover.points.reserve(pts.size());
  for (const auto& p : pts) cover.points.push_back(Vec{p[0], p[1], p[2]});
  cover.c_cover = static_cast<double>(cover.points.size()) * epsilon * epsilon;
  return cover;
}

model::SpinChain align_stage_apply(const model::SpinChain& input, int m, double local_t) {
  require_n3(input, "alignment");
  const int L = input.length();
  if (m < 2 || m > L) throw Error(Errc::InvalidConfig, "alignment stage out of range");
  const Vec v1 = input.spin_vec(0);
  const Vec target = input.spin_vec(m % L);
  const Vec ref = input.spin_vec(m - 1);
  const double c = dot(target, v1);
  Vec v2(3);
  if (1.0 - std::abs(c) < 1e-12) {
    // Degenerate frame (the target sits at +-v1): any unit vector orthogonal
    // to v1 is admissible. Taking the projection of the spin being aligned
    // makes this stage the identity map, with unit Jacobian.
    const Vec proj = ref - dot(ref, v1) * v1;
    v2 = norm(proj) > 1e-9 ? geometry::retract(proj) : geometry::any_orthogonal(v1);
  } else {
    v2 = geometry::retract(target - c * v1);
  }
  const Vec v3 = cross3(v1, v2);
  const double rho_ref_sq = 1.0 - dot(ref, v1) * dot(ref, v1);
  const double theta_ref = rho_ref_sq < 1e-18 ? 0.0 : std::atan2(dot(ref, v3), dot(ref, v2));
  model::SpinChain out = input;
  const double shift = local_t * theta_ref;
  for (int i = 1; i < m; ++i) {
    const Vec si = input.spin_vec(i);
    const double u = dot(si, v1);
    const double a = dot(si, v2), b = dot(si, v3);
    const double az = std::atan2(b, a) - shift;
    const double rho = std::sqrt(std::max(0.0, 1.0 - u * u));
    out.set_spin(i, geometry::retract(u * v1 + rho * std::cos(az) * v2 + rho * std::sin(az) * v3));
  }
  return out;
}

AlignPath::AlignPath(const model::SpinChain& chain, double epsilon)
    : epsilon_(epsilon),
      stage_duration_(1.0 - epsilon / chain.length()),
      duration_((chain.length() - 1) * (1.0 - epsilon / chain.length())),
      end_(chain) {
  require_n3(chain, "alignment");
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw Error(Errc::InvalidConfig, "alignment epsilon must lie in (0, 1)");
  const int L = chain.length();
  stage_starts_.reserve(static_cast<size_t>(L - 1));
  model::SpinChain cur = chain;
  for (int m = 2; m <= L; ++m) {
    stage_starts_.push_back(cur);
    stage_identity_.push_back(1.0 - std::abs(dot(cur.spin_vec(m % L), cur.spin_vec(0))) < 1e-12);
    cur = align_stage_apply(cur, m, stage_duration_);
  }
  end_ = std::move(cur);
}

model::SpinChain AlignPath::at(double t) const {
  const int n_st = n_stages();
  int idx = static_cast<int>(t / stage_duration_);
  idx = std::clamp(idx, 0, n_st - 1);
  double local = std::clamp(t - idx * stage_duration_, 0.0, stage_duration_);
  return align_stage_apply(stage_starts_[static_cast<size_t>(idx)], 2 + idx, local);
}

double AlignPath::log_jacobian(double t) const {
  const int L = static_cast<int>(stage_starts_.size()) + 1;
  const int n_st = n_stages();
  int idx = static_cast<int>(t / stage_duration_);
  idx = std::clamp(idx, 0, n_st - 1);
  const double local = std::clamp(t - idx * stage_duration_, 0.0, stage_duration_);
  double lj = 0.0;
  for (int k = 0; k < idx; ++k)
    if (!stage_identity_[static_cast<size_t>(k)]) lj += std::log(L / epsilon_);
  if (!stage_identity_[static_cast<size_t>(idx)]) lj -= std::log1p(-local);
  return lj;
}

ContractPath::ContractPath(const model::SpinChain& chain, const Vec& s, double epsilon)
    : start_(chain), s_(s) {
  require_n3(chain, "contraction");
  if (!(epsilon > 0.0) || epsilon > std::sin(kPi / 16.0))
    throw Error(Errc::InvalidConfig, "contraction epsilon must lie in (0, sin(pi/16)]");
  const int L = chain.length();
  v1_ = geometry::any_orthogonal(s_);
  v2_ = cross3(s_, v1_);
  theta_.resize(static_cast<size_t>(L));
  phi_.resize(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    const Vec si = chain.spin_vec(i);
    const double ds = std::clamp(dot(si, s_), -1.0, 1.0);
    if (!(std::abs(ds) < epsilon))
      throw Error(Errc::NotNearEquator,
                  "spin " + std::to_string(i) + " is not within epsilon of the equator");
    theta_[static_cast<size_t>(i)] = -std::asin(ds);
    phi_[static_cast<size_t>(i)] = std::atan2(dot(si, v2_), dot(si, v1_));
  }
  const int bonds = chain.bc() == model::BoundaryCondition::Periodic ? L : L - 1;
  deriv0_ = 0.0;
  for (int b = 0; b < bonds; ++b) {
    const int j = (b + 1) % L;
    deriv0_ += std::sin(theta_[static_cast<size_t>(b)] + theta_[static_cast<size_t>(j)]) *
               (1.0 - std::cos(phi_[static_cast<size_t>(b)] - phi_[static_cast<size_t>(j)]));
  }
  branch_ = deriv0_ >= 0.0 ? +1 : -1;
  duration_ = kPi / 2.0 - std::asin(epsilon);
}

model::SpinChain ContractPath::at(double t) const {
  model::SpinChain out = start_;
  const int L = start_.length();
  for (int i = 0; i < L; ++i) {
    const double th = theta_[static_cast<size_t>(i)] + branch_ * t;
    const double ph = phi_[static_cast<size_t>(i)];
    out.set_spin(i, geometry::retract(-std::sin(th) * s_ +
                                      std::cos(th) * (std::cos(ph) * v1_ + std::sin(ph) * v2_)));
  }
  return out;
}

double ContractPath::log_jacobian(double t) const {
  double lj = 0.0;
  for (double th : theta_)
    lj += std::log(std::cos(th + branch_ * t)) - std::log(std::cos(th));
  return lj;
}

double rotate_duration(const Vec& s, int n_dim) {
  return geometry::geodesic_distance(s, Vec::basis(n_dim, 0));
}

model::SpinChain rotate_path(const model::SpinChain& chain, const Vec& s, double t) {
  const int n = chain.n_dim();
  const Vec e1 = Vec::basis(n, 0);
  const double c = dot(s, e1);
  Vec f(n);
  if (1.0 - std::abs(c) < 1e-12) {
    if (c > 0.0) return chain;  // already at e1, zero-duration rotation
    f = Vec::basis(n, 1);       // antipodal: rotate through the (e1, e2) plane
  } else {
    f = geometry::retract(s - c * e1);
  }
  const auto rot = geometry::Rotation::plane(e1, f, -t);
  model::SpinChain out = chain;
  for (int i = 0; i < chain.length(); ++i) out.set_spin(i, rot.apply(chain.spin_vec(i)));
  return out;
}

CanonicalPath::CanonicalPath(const model::SpinChain& chain, const SphereCover& cover,
                             const PathEpsilons& eps)
    : eps_(eps), align_(chain, eps.align), rotate_from_(3) {
  require_n3(chain, "canonical path");
  const model::SpinChain& aligned = align_.endpoint();
  const int L = chain.length();
  int best = -1;
  double best_maxdot = 1e300;
  for (size_t k = 0; k < cover.points.size(); ++k) {
    double maxdot = 0.0;
    for (int i = 0; i < L; ++i)
      maxdot = std::max(maxdot, std::abs(dot(aligned.spin_vec(i), cover.points[k])));
    if (maxdot < eps.contract && maxdot < best_maxdot) {
      best = static_cast<int>(k);
      best_maxdot = maxdot;
    }
  }
  if (best < 0)
    throw Error(Errc::NoLabelFound, "no cover axis has the aligned configuration near its equator");
  contract_.emplace(aligned, cover.points[static_cast<size_t>(best)], eps.contract);
  label_.axis = cover.points[static_cast<size_t>(best)];
  label_.cover_index = best;
  label_.sigma = contract_->sigma();
  rotate_from_ = label_.sigma > 0 ? label_.axis : -1.0 * label_.axis;
  t1_ = align_.duration();
  t2_ = t1_ + contract_->duration();
  t3_ = t2_ + rotate_duration(rotate_from_, 3);
}

int CanonicalPath::segment_of(double t_raw) const {
  if (t_raw >= t2_) return align_.n_stages() + 1;
  if (t_raw >= t1_) return align_.n_stages();
  const int idx = static_cast<int>(t_raw / align_.stage_duration());
  return std::clamp(idx, 0, align_.n_stages() - 1);
}

model::SpinChain CanonicalPath::at_raw(double t_raw) const {
  if (t_raw <= t1_) return align_.at(t_raw);
  if (t_raw <= t2_) return contract_->at(t_raw - t1_);
  const model::SpinChain pole_cfg = contract_->at(contract_->duration());
  return rotate_path(pole_cfg, rotate_from_, std::min(t_raw, t3_) - t2_);
}

double CanonicalPath::log_jacobian_raw(double t_raw) const {
  if (t_raw <= t1_) return align_.log_jacobian(t_raw);
  const double lj_align = align_.log_jacobian(t1_);
  if (t_raw <= t2_) return lj_align + contract_->log_jacobian(t_raw - t1_);
  return lj_align + contract_->log_jacobian(contract_->duration());
}

std::pair<PathLabel, model::SpinChain> full_path(const model::SpinChain& chain,
                                                 const SphereCover& cover, double t01,
                                                 const PathEpsilons& eps) {
  const CanonicalPath path(chain, cover, eps);
  return {path.label(), path.at(std::clamp(t01, 0.0, 1.0))};
}

PathTrace sample_path_trace(const CanonicalPath& path, int points_per_segment) {
  PathTrace trace;
  trace.label = path.label();
  trace.epsilons = path.epsilons();
  trace.n_align_segments = path.n_align_stages();
  const int n_segments = path.n_align_stages() + 2;
  for (int seg = 0; seg < n_segments; ++seg) {
    double lo, hi;
    if (seg < path.n_align_stages()) {
      lo = seg * (path.align_end_time() / path.n_align_stages());
      hi = (seg + 1) * (path.align_end_time() / path.n_align_stages());
    } else if (seg == path.n_align_stages()) {
      lo = path.align_end_time();
      hi = path.contract_end_time();
    } else {
      lo = path.contract_end_time();
      hi = path.total_time();
    }
    if (hi - lo < 1e-12) {
      // zero-duration final rotation (axis already at e1)
      if (trace.times.empty() || trace.times.back() < lo) {
        trace.times.push_back(lo);
        trace.segments.push_back(seg);
        trace.configs.push_back(path.at_raw(lo));
        trace.energies.push_back(model::energy(trace.configs.back()));
        trace.log_jacobian.push_back(path.log_jacobian_raw(lo));
      }
      continue;
    }
    for (int k = 0; k <= points_per_segment; ++k) {
      const double t = lo + (hi - lo) * k / points_per_segment;
      if (!trace.times.empty() && t <= trace.times.back() + 1e-15) continue;
      trace.times.push_back(t);
      trace.segments.push_back(seg);
      trace.configs.push_back(path.at_raw(t));
      trace.energies.push_back(model::energy(trace.configs.back()));
      trace.log_jacobian.push_back(path.log_jacobian_raw(t));
    }
  }
  trace.length = path.at_raw(0.0).length();
  return trace;
}

Certificate certify_path(const PathTrace& trace, double beta, double mu_arctic, int n_labels) {
  Certificate cert;
  const size_t n = trace.times.size();
  if (n < 2) throw Error(Errc::InvalidConfig, "trace too short");
  const int L = trace.length;
  std::vector<int> per_segment(static_cast<size_t>(trace.n_align_segments) + 2, 0);
  for (int s : trace.segments) ++per_segment[static_cast<size_t>(s)];
  for (size_t s = 0; s < per_segment.size(); ++s)
    if (per_segment[s] > 1 && per_segment[s] < 100)
      throw Error(Errc::InvalidConfig, "need at least 100 trace points per segment");

  cert.endpoint_in_arctic = model::in_arctic(trace.configs.back());

  const double e0 = trace.energies.front();
  cert.energy_pass = true;
  for (size_t k = 1; k < n; ++k) {
    const double rise_step = trace.energies[k] - trace.energies[k - 1];
    cert.max_step_energy_rise = std::max(cert.max_step_energy_rise, rise_step);
    if (trace.energies[k] - e0 > 1e-9 * static_cast<double>(k) + 1e-12) cert.energy_pass = false;
  }
  cert.total_energy_change = trace.energies.back() - e0;

  cert.speed_budget_align = 4.0 * std::pow(kPi, 4) * L;
  cert.speed_budget_other = 4.0 * kPi * kPi * L;
  for (size_t k = 1; k < n; ++k) {
    if (trace.segments[k] != trace.segments[k - 1]) continue;
    const double dt = trace.times[k] - trace.times[k - 1];
    if (dt <= 0.0) continue;
    double dsq = 0.0;
    const auto& a = trace.configs[k - 1].raw();
    const auto& b = trace.configs[k].raw();
    for (size_t t = 0; t < a.size(); ++t) dsq += (b[t] - a[t]) * (b[t] - a[t]);
    const double ssq = dsq / (dt * dt);
    if (trace.segments[k] < trace.n_align_segments)
      cert.max_speed_sq_align = std::max(cert.max_speed_sq_align, ssq);
    else
      cert.max_speed_sq_other = std::max(cert.max_speed_sq_other, ssq);
  }
  cert.speed_pass = cert.max_speed_sq_align <= cert.speed_budget_align &&
                    cert.max_speed_sq_other <= cert.speed_budget_other;

  cert.final_log_jacobian = trace.log_jacobian.back();
  for (double lj : trace.log_jacobian) cert.max_log_jacobian = std::max(cert.max_log_jacobian, lj);
  cert.log_jacobian_budget =
      L * std::log(L / trace.epsilons.align) + L * std::log(2.0);
  cert.jacobian_pass = cert.max_log_jacobian <= cert.log_jacobian_budget;

  cert.implied_delta_f = beta > 0.0 ? cert.log_jacobian_budget / beta : cert.log_jacobian_budget;
  const double v_sq = std::max(cert.max_speed_sq_align, cert.max_speed_sq_other);
  const double bdf = beta > 0.0 ? beta * cert.implied_delta_f : cert.log_jacobian_budget;
  cert.implied_t_rel_bound = 3.0 * static_cast<double>(n_labels) * n_labels * beta *
                             (v_sq * std::exp(bdf) + std::exp(2.0 * bdf) * mu_arctic);

  cert.pass = cert.endpoint_in_arctic && cert.energy_pass && cert.speed_pass && cert.jacobian_pass;
  return cert;
}

double coplanarity_residual(const model::SpinChain& chain) {
  return linalg::smallest_singular_value(chain.raw(), chain.length(), chain.n_dim());
}

}  // namespace spinchain::paths
