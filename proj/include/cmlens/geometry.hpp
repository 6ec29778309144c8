#pragma once

// Kelvin-type radial maps (inversions through a sphere), their Jacobians,
// inverses and compositions, plus the two-layer lens radius arithmetic.

#include <cmath>
#include <random>
#include <stdexcept>

#include "cmlens/common.hpp"

namespace cmlens {

// Radii of the two-layer lens of magnification m built on exponent alpha.
// The defining relations are
//   alpha*beta - alpha - beta = 0,
//   r1 = m^(1-1/alpha) r0,  r2 = m r0,  r3 = m^(2-1/alpha) r0.
struct LensRadii {
  double r0, r1, r2, r3;
  double m;
  double alpha, beta;
};

inline LensRadii lens_radii(double m, double r0, double alpha) {
  if (!(m > 1.0)) throw std::domain_error("lens_radii: m must be > 1");
  if (!(r0 > 0.0)) throw std::domain_error("lens_radii: r0 must be > 0");
  if (!(alpha > 1.0)) throw std::domain_error("lens_radii: alpha must be > 1");
  LensRadii L;
  L.m = m;
  L.r0 = r0;
  L.alpha = alpha;
  L.beta = alpha / (alpha - 1.0);
  L.r1 = std::pow(m, 1.0 - 1.0 / alpha) * r0;
  L.r2 = m * r0;
  L.r3 = std::pow(m, 2.0 - 1.0 / alpha) * r0;
  return L;
}

// x -> c + rho^a (x-c)/|x-c|^a with a > 1, rho > 0.  Fixes the sphere
// |x-c| = rho pointwise and exchanges its inside and outside.  The radial
// conjugation law |K(x)-c| |x-c|^(a-1) = rho^a holds exactly.
class RadialMap {
 public:
  RadialMap(const Vec3& center, double exponent, double reference_radius)
      : center_(center), exponent_(exponent), rho_(reference_radius) {
    if (!(exponent_ > 1.0)) throw std::domain_error("RadialMap: exponent must be > 1");
    if (!(rho_ > 0.0)) throw std::domain_error("RadialMap: reference radius must be > 0");
  }
  RadialMap(double exponent, double reference_radius)
      : RadialMap(Vec3::Zero(), exponent, reference_radius) {}

  Vec3 operator()(const Vec3& x) const {
    const Vec3 d = x - center_;
    const double r = d.norm();
    if (r == 0.0) throw std::domain_error("RadialMap: evaluation at the puncture");
    return center_ + std::pow(rho_ / r, exponent_) * d;
  }

  // (rho/r)^a (I - a rhat x rhat) in the centered frame; det < 0 everywhere.
  Mat3 jacobian(const Vec3& x) const {
    const Vec3 d = x - center_;
    const double r = d.norm();
    if (r == 0.0) throw std::domain_error("RadialMap: Jacobian at the puncture");
    const Vec3 rhat = d / r;
    const double scale = std::pow(rho_ / r, exponent_);
    return scale * (Mat3::Identity() - exponent_ * (rhat * rhat.transpose()));
  }

  double jacobian_det(const Vec3& x) const {
    const double r = (x - center_).norm();
    if (r == 0.0) throw std::domain_error("RadialMap: Jacobian at the puncture");
    return std::pow(rho_ / r, 3.0 * exponent_) * (1.0 - exponent_);
  }

  // The inverse is again a Kelvin map: exponent a/(a-1), same sphere.
  RadialMap inverse() const { return RadialMap(center_, exponent_ / (exponent_ - 1.0), rho_); }

  Vec3 inverse_eval(const Vec3& x) const { return inverse()(x); }

  const Vec3& center() const { return center_; }
  double exponent() const { return exponent_; }
  double reference_radius() const { return rho_; }

 private:
  Vec3 center_;
  double exponent_;
  double rho_;
};

struct IdentityMap {
  Vec3 operator()(const Vec3& x) const { return x; }
  Mat3 jacobian(const Vec3&) const { return Mat3::Identity(); }
  double jacobian_det(const Vec3&) const { return 1.0; }
  Vec3 inverse_eval(const Vec3& x) const { return x; }
};

struct Dilation {
  double factor;
  explicit Dilation(double f) : factor(f) {
    if (!(f != 0.0)) throw std::domain_error("Dilation: zero factor");
  }
  Vec3 operator()(const Vec3& x) const { return factor * x; }
  Mat3 jacobian(const Vec3&) const { return factor * Mat3::Identity(); }
  double jacobian_det(const Vec3&) const { return factor * factor * factor; }
  Vec3 inverse_eval(const Vec3& x) const { return x / factor; }
};

// outer after inner.
template <class Outer, class Inner>
struct Composed {
  Outer outer;
  Inner inner;
  Vec3 operator()(const Vec3& x) const { return outer(inner(x)); }
  Mat3 jacobian(const Vec3& x) const { return outer.jacobian(inner(x)) * inner.jacobian(x); }
  double jacobian_det(const Vec3& x) const {
    return outer.jacobian_det(inner(x)) * inner.jacobian_det(x);
  }
  Vec3 inverse_eval(const Vec3& x) const { return inner.inverse_eval(outer.inverse_eval(x)); }
};

template <class Outer, class Inner>
Composed<Outer, Inner> compose(const Outer& outer, const Inner& inner) {
  return {outer, inner};
}

inline Vec3 eval_map(const RadialMap& map, const Vec3& x) { return map(x); }
inline Mat3 jacobian(const RadialMap& map, const Vec3& x) { return map.jacobian(x); }
inline RadialMap inverse_map(const RadialMap& map) { return map.inverse(); }

inline RadialMap lens_map_F(const LensRadii& L) { return RadialMap(L.alpha, L.r2); }
inline RadialMap lens_map_G(const LensRadii& L) { return RadialMap(L.beta, L.r3); }

// Dilation factor of G o F restricted to the object ball.  Verifies at
// sample points that the composition is a pure dilation; for maps built
// from the same LensRadii the factor equals m.
inline double compose_object_map(const RadialMap& F, const RadialMap& G, const LensRadii& lens,
                                 int samples = 64, double tol = 1e-10) {
  const auto GF = compose(G, F);
  const Vec3 probe(0.0, 0.0, 0.5 * lens.r0);
  const double factor = GF(probe).norm() / probe.norm();
  std::mt19937 rng(0x5eed5u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    Vec3 x(u(rng), u(rng), u(rng));
    double r = x.norm();
    if (r < 1e-3) {
      x = Vec3(0.3, -0.2, 0.1);
      r = x.norm();
    }
    x *= (0.05 + 0.9 * std::abs(u(rng))) * lens.r0 / r;
    const Vec3 image = GF(x);
    if ((image - factor * x).norm() > tol * std::max(1.0, factor * x.norm()))
      throw std::runtime_error("compose_object_map: composition is not a pure dilation");
  }
  return factor;
}

}  // namespace cmlens
