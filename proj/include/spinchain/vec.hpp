#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>

#include "spinchain/error.hpp"

namespace spinchain {

// Spins live on S^{N-1} with 2 <= N <= kMaxDim. The small fixed capacity
// keeps per-spin storage on the stack in hot loops.
inline constexpr int kMaxDim = 8;

// Fixed-capacity vector in R^n, n in [1, kMaxDim].
class Vec {
 public:
  Vec() = default;
  explicit Vec(int n) : n_(n) { check_dim(n); }
  Vec(std::initializer_list<double> xs) : n_(static_cast<int>(xs.size())) {
    check_dim(n_);
    int i = 0;
    for (double x : xs) c_[i++] = x;
  }
  static Vec zero(int n) { return Vec(n); }
  static Vec basis(int n, int axis) {
    Vec v(n);
    v[axis] = 1.0;
    return v;
  }
  static Vec from(std::span<const double> xs) {
    Vec v(static_cast<int>(xs.size()));
    for (int i = 0; i < v.n_; ++i) v.c_[i] = xs[i];
    return v;
  }

  int dim() const { return n_; }
  double& operator[](int i) { return c_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return c_[static_cast<size_t>(i)]; }
  double* data() { return c_.data(); }
  const double* data() const { return c_.data(); }
  std::span<const double> span() const { return {c_.data(), static_cast<size_t>(n_)}; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n_; ++i) c_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }

 private:
  static void check_dim(int n) {
    if (n < 1 || n > kMaxDim) throw Error(Errc::InvalidDimension, "vector dimension out of range");
  }
  std::array<double, kMaxDim> c_{};
  int n_ = 0;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double dot(const Vec& a, const Vec& b) { return dot(a.span(), b.span()); }
inline double norm_sq(std::span<const double> a) { return dot(a, a); }
inline double norm_sq(const Vec& a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }
inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

}  // namespace spinchain
