#include "spinchain/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace spinchain::geometry {

namespace {
constexpr double kUnitTol = 1e-9;
}

Rotation Rotation::axis_angle(const UnitVector& v, double angle) {
  if (std::abs(norm(v) - 1.0) > kUnitTol || std::abs(v[0]) > kUnitTol)
    throw Error(Errc::InvalidAxis, "axis must be unit and orthogonal to e1");
  return Rotation(UnitVector::basis(v.dim(), 0), v, angle);
}

Rotation Rotation::plane(const UnitVector& a, const UnitVector& b, double angle) {
  if (std::abs(norm(a) - 1.0) > kUnitTol || std::abs(norm(b) - 1.0) > kUnitTol ||
      std::abs(dot(a, b)) > kUnitTol)
    throw Error(Errc::InvalidAxis, "plane spanning pair must be orthonormal");
  return Rotation(a, b, angle);
}

Vec Rotation::apply(const Vec& x) const {
  const double c = std::cos(angle_), s = std::sin(angle_);
  const double xe = dot(x, e_), xf = dot(x, f_);
  Vec y = x;
  y += ((c - 1.0) * xe - s * xf) * e_;
  y += (s * xe + (c - 1.0) * xf) * f_;
  return y;
}

TangentVector project_tangent(const UnitVector& p, const Vec& x) {
  Vec d = x;
  d -= dot(x, p) * p;
  return {p, d};
}

UnitVector retract(const Vec& x) {
  const double r = norm(x);
  if (r <= 1e-14) throw Error(Errc::NearZeroVector, "cannot normalize a near-zero vector");
  return (1.0 / r) * x;
}

double geodesic_distance(const UnitVector& p, const UnitVector& q) {
  return std::acos(std::clamp(dot(p, q), -1.0, 1.0));
}

UnitVector any_orthogonal(const UnitVector& v) {
  for (int k = 0; k < v.dim(); ++k) {
    if (std::abs(v[k]) < 0.9) {
      Vec u = Vec::basis(v.dim(), k);
      u -= dot(u, v) * v;
      return retract(u);
    }
  }
  // Unreachable for unit v: at most one coordinate can exceed 0.9 in absolute
  // value when the rest carry < 0.19 of the mass.
  return retract(project_tangent(v, Vec::basis(v.dim(), 1)).direction);
}

}  // namespace spinchain::geometry
