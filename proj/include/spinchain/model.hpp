#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spinchain/geometry.hpp"
#include "spinchain/vec.hpp"

namespace spinchain::model {

enum class BoundaryCondition : uint8_t { Free = 0, Periodic = 1 };

const char* bc_name(BoundaryCondition bc);
BoundaryCondition bc_from_name(const std::string& name);

// All spins with S . e1 above this threshold form the arctic set.
inline constexpr double kArcticThreshold = 0.99;

// An ordered collection of L unit vectors in R^N. Indexing is cyclic under
// periodic boundary conditions (site L+1 is site 1). Storage is flat
// row-major for cache-friendly sweeps.
class SpinChain {
 public:
  SpinChain(int n_dim, int length, BoundaryCondition bc);

  static SpinChain aligned(int n_dim, int length, BoundaryCondition bc);
  // N = 2 circle configuration S_j = (cos(2 pi w j / L), sin(2 pi w j / L)).
  static SpinChain ring(int length, int winding, BoundaryCondition bc);

  int n_dim() const { return n_dim_; }
  int length() const { return length_; }
  BoundaryCondition bc() const { return bc_; }

  std::span<double> spin(int i) { return {data_.data() + static_cast<size_t>(i) * n_dim_, static_cast<size_t>(n_dim_)}; }
  std::span<const double> spin(int i) const { return {data_.data() + static_cast<size_t>(i) * n_dim_, static_cast<size_t>(n_dim_)}; }
  Vec spin_vec(int i) const { return Vec::from(spin(i)); }
  void set_spin(int i, const Vec& v);

  // Neighbor index helpers; -1 when a free-boundary neighbor is absent.
  int left(int i) const { return i > 0 ? i - 1 : (bc_ == BoundaryCondition::Periodic ? length_ - 1 : -1); }
  int right(int i) const { return i < length_ - 1 ? i + 1 : (bc_ == BoundaryCondition::Periodic ? 0 : -1); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double max_unit_violation() const;

 private:
  int n_dim_;
  int length_;
  BoundaryCondition bc_;
  std::vector<double> data_;
};

// H = -sum of nearest-neighbor dot products; bonds wrap under Periodic.
// Accumulated with pairwise summation.
double energy(const SpinChain& chain);
// Sphere gradient of H at site i (1-based sites are not used; i in [0, L)).
// Free-boundary edge sites use the single present neighbor.
geometry::TangentVector grad_energy(const SpinChain& chain, int i);
// Sum over sites of ||D_i H||^2.
double grad_energy_norm_sq(const SpinChain& chain);
bool in_arctic(const SpinChain& chain, double threshold = kArcticThreshold);
// exp(beta): the density factor relating free and periodic Gibbs measures.
double relative_density_bound(double beta);

// Self-describing binary record: magic "ONCH", version u16, N u16, L u32,
// bc u8, then L*N little-endian f64. Round-trips bit-exactly.
void write_binary(std::ostream& os, const SpinChain& chain);
SpinChain read_binary(std::istream& is);
std::string to_json_string(const SpinChain& chain);
SpinChain from_json_string(const std::string& s);

// Length-prefixed stream of binary records.
void dump_samples(std::ostream& os, const std::vector<SpinChain>& chains);
std::vector<SpinChain> load_samples(std::istream& is);

// Eigenvalues of the finite-difference Hessian of H in the tangent chart at
// e1 (dimension L*(N-1)); reported for configurations in the arctic, where
// convexity is expected but not asserted.
std::vector<double> hessian_spectrum_in_chart(const SpinChain& chain, double fd_step = 1e-4);

}  // namespace spinchain::model
