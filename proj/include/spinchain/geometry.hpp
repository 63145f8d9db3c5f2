#pragma once

#include <span>

#include "spinchain/vec.hpp"

namespace spinchain::geometry {

// A Vec produced by a normalizing operation; norm 1 within 1e-12.
using UnitVector = Vec;

struct TangentVector {
  UnitVector base;
  Vec direction;  // direction . base == 0 within 1e-10
};

// Rotation in the plane spanned by an orthonormal pair (e, f) by `angle`.
// The one-parameter family rotating e1 toward an equatorial axis v is the
// special case e = e1, f = v; a general plane is needed when neither
// spanning vector is a coordinate axis.
class Rotation {
 public:
  // Requires v unit and orthogonal to e1; angle in radians.
  static Rotation axis_angle(const UnitVector& v, double angle);
  // Requires (a, b) orthonormal.
  static Rotation plane(const UnitVector& a, const UnitVector& b, double angle);

  Vec apply(const Vec& x) const;
  Rotation inverse() const { return Rotation(e_, f_, -angle_); }
  double angle() const { return angle_; }

 private:
  Rotation(UnitVector e, UnitVector f, double angle) : e_(e), f_(f), angle_(angle) {}
  UnitVector e_, f_;
  double angle_;
};

TangentVector project_tangent(const UnitVector& p, const Vec& x);
// x / ||x||; throws NearZeroVector when ||x|| <= 1e-14.
UnitVector retract(const Vec& x);
inline Vec rotate(const Rotation& r, const Vec& x) { return r.apply(x); }
// arccos of the clamped dot product; in [0, pi].
double geodesic_distance(const UnitVector& p, const UnitVector& q);

// Some unit vector orthogonal to v, chosen deterministically: the first
// canonical basis vector with |dot| < 0.9 against v, Gram-Schmidt corrected.
UnitVector any_orthogonal(const UnitVector& v);

}  // namespace spinchain::geometry
