#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spinchain/model.hpp"
#include "spinchain/rng.hpp"
#include "spinchain/vec.hpp"

namespace spinchain::paths {

// Pole-pulling flow on the sphere: the solution through s' of
// d/dt x = s - (x . s) x, evaluated at time t. Throws AntipodalStart when
// s' is within 1e-9 of -s.
Vec pulling_flow(const Vec& s, const Vec& s_prime, double t);

struct HemispherePullReport {
  double min_step_decrease = 0.0;  // most negative -(H(t_{k+1}) - H(t_k)); >= -1e-9 when monotone
  double max_energy_rise = 0.0;
  bool monotone = false;
};

// Energy of the per-spin pulling flow along t_grid must be non-increasing
// when every spin starts strictly inside the hemisphere around s.
HemispherePullReport verify_hemisphere_pulling(const model::SpinChain& chain, const Vec& s,
                                               std::span<const double> t_grid);

struct SphereCover {
  double epsilon = 0.0;
  std::vector<Vec> points;
  double c_cover = 0.0;  // points.size() * epsilon^2
};

// Epsilon-dense point set on S^2 built by projecting an epsilon/2 grid on
// the boundary of the cube [-1,1]^3; K <= c_cover / epsilon^2 points.
// Requires 0 < epsilon <= sin(pi/16).
SphereCover build_cover(double epsilon);

// Stage map of the alignment path: rotates sites 1..m-1 about the axis
// spanned by site 0 by the fraction local_t of the azimuth of site m-1,
// measured in the frame built from sites 0 and (m mod L). N = 3.
model::SpinChain align_stage_apply(const model::SpinChain& input, int m, double local_t);

// The composed alignment: stages m = 2..L, each of local duration
// 1 - epsilon/L. At full time the configuration is within O(epsilon) of the
// plane spanned by sites 0 and L-1.
class AlignPath {
 public:
  AlignPath(const model::SpinChain& chain, double epsilon);
  double duration() const { return duration_; }
  int n_stages() const { return static_cast<int>(stage_starts_.size()); }
  double stage_duration() const { return stage_duration_; }
  model::SpinChain at(double t) const;
  double log_jacobian(double t) const;
  const model::SpinChain& endpoint() const { return end_; }

 private:
  double epsilon_;
  double stage_duration_;
  double duration_;
  std::vector<model::SpinChain> stage_starts_;  // config entering stage m = 2 + idx
  std::vector<bool> stage_identity_;            // degenerate frames give identity stages
  model::SpinChain end_;
};

// Rigid polar shift toward one of the poles +-s, from a configuration with
// all spins within epsilon of the equator of s (|S_i . s| < epsilon,
// epsilon <= sin(pi/16)); the branch is chosen so the energy is
// non-increasing. Duration pi/2 - arcsin(epsilon); the endpoint satisfies
// S_i . (sigma s) >= 1 - 2 arcsin(epsilon)^2.
class ContractPath {
 public:
  ContractPath(const model::SpinChain& chain, const Vec& s, double epsilon);
  double duration() const { return duration_; }
  int branch() const { return branch_; }  // +1: polar angles shift up; -1: down
  int sigma() const { return -branch_; }  // pole reached is sigma() * s
  model::SpinChain at(double t) const;
  double log_jacobian(double t) const;
  double energy_derivative_at0() const { return deriv0_; }

 private:
  model::SpinChain start_;
  Vec s_, v1_, v2_;
  std::vector<double> theta_, phi_;
  int branch_ = 1;
  double deriv0_ = 0.0;
  double duration_ = 0.0;
};

// Global rotation in the plane spanned by s and e1 carrying s to e1 over
// t in [0, angle(s, e1)]; energy exactly constant, unit Jacobian.
model::SpinChain rotate_path(const model::SpinChain& chain, const Vec& s, double t);
double rotate_duration(const Vec& s, int n_dim);

struct PathLabel {
  int sigma = +1;      // endpoint pole is sigma * axis
  Vec axis;            // cover point
  int cover_index = -1;
};

struct PathEpsilons {
  double contract = 0.0707;  // largest with 1 - 2 arcsin(e)^2 > 0.99, under sin(pi/16)
  double cover = 0.0707 / 2.0;
  double align = 0.0707 / 2.0 / 3.2;
};

// The composed three-segment path: align, contract toward the labeled
// cover axis, rotate to e1. Defined for N = 3 periodic chains; the label
// (sigma, v) is selected by membership tests on the segment endpoints.
class CanonicalPath {
 public:
  CanonicalPath(const model::SpinChain& chain, const SphereCover& cover,
                const PathEpsilons& eps = {});
  const PathLabel& label() const { return label_; }
  const PathEpsilons& epsilons() const { return eps_; }
  double total_time() const { return t3_; }
  double align_end_time() const { return t1_; }
  double contract_end_time() const { return t2_; }
  int n_align_stages() const { return align_.n_stages(); }
  // segment id: 0..n_align_stages-1 for align stages, then contract, rotate
  int segment_of(double t_raw) const;
  model::SpinChain at_raw(double t_raw) const;
  model::SpinChain at(double t01) const { return at_raw(t01 * t3_); }
  double log_jacobian_raw(double t_raw) const;

 private:
  PathEpsilons eps_;
  AlignPath align_;
  std::optional<ContractPath> contract_;
  PathLabel label_;
  Vec rotate_from_;
  double t1_ = 0.0, t2_ = 0.0, t3_ = 0.0;
};

// Convenience form: evaluate the composed path at normalized time.
std::pair<PathLabel, model::SpinChain> full_path(const model::SpinChain& chain,
                                                 const SphereCover& cover, double t01,
                                                 const PathEpsilons& eps = {});

struct PathTrace {
  std::vector<double> times;  // raw times
  std::vector<int> segments;
  std::vector<model::SpinChain> configs;
  std::vector<double> energies;
  std::vector<double> log_jacobian;
  PathLabel label;
  PathEpsilons epsilons;
  int n_align_segments = 0;
  int length = 0;
};

PathTrace sample_path_trace(const CanonicalPath& path, int points_per_segment);

struct Certificate {
  bool endpoint_in_arctic = false;
  double max_step_energy_rise = 0.0;
  double total_energy_change = 0.0;
  bool energy_pass = false;
  double max_speed_sq_align = 0.0;
  double max_speed_sq_other = 0.0;
  double speed_budget_align = 0.0;  // 4 pi^4 L
  double speed_budget_other = 0.0;  // 4 pi^2 L
  bool speed_pass = false;
  double final_log_jacobian = 0.0;
  double max_log_jacobian = 0.0;
  double log_jacobian_budget = 0.0;  // L log(L / eps_align) + L log 2
  bool jacobian_pass = false;
  double implied_delta_f = 0.0;      // log-jacobian budget / beta
  double implied_t_rel_bound = 0.0;  // 3 K^2 beta (v^2 e^{b dF} + e^{2 b dF} mu(A))
  bool pass = false;
};

// Checks the path-lemma hypotheses on a sampled trace: endpoint in the
// arctic, energy rises bounded by 1e-9 per sample step, finite-difference
// speeds within the per-segment budgets, accumulated log-Jacobian within
// budget. Requires >= 100 points per segment. K is the label count
// (2 x cover size); mu_arctic an estimate of the arctic measure.
Certificate certify_path(const PathTrace& trace, double beta, double mu_arctic, int n_labels);

// Smallest singular value of the L x N matrix of spin rows.
double coplanarity_residual(const model::SpinChain& chain);

}  // namespace spinchain::paths
