#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace cmlens {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

inline constexpr double pi = 3.14159265358979323846264338327950288;

// Algebraic cross product of complex vectors.  Eigen's cross() conjugates
// the result for complex scalars, which is not the product wanted here.
inline CVec3 ccross(const CVec3& a, const CVec3& b) {
  return CVec3(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

// Orthonormal spherical frame (e_r, e_theta, e_phi) at x.  On the polar
// axis the tangential pair is chosen from the x/y axes so the frame is
// always well defined.
struct SphericalFrame {
  Vec3 er, etheta, ephi;
  double r, theta, phi;
};

inline SphericalFrame spherical_frame(const Vec3& x) {
  SphericalFrame f;
  f.r = x.norm();
  if (f.r == 0.0) throw std::domain_error("spherical_frame: origin");
  f.er = x / f.r;
  const double rho = std::hypot(x.x(), x.y());
  f.theta = std::atan2(rho, x.z());
  f.phi = std::atan2(x.y(), x.x());
  if (rho < 1e-300) {
    f.phi = 0.0;
    f.etheta = Vec3(x.z() >= 0 ? 1.0 : -1.0, 0.0, 0.0);
  } else {
    const double ct = x.z() / f.r, st = rho / f.r;
    f.etheta = Vec3(ct * x.x() / rho, ct * x.y() / rho, -st);
  }
  f.ephi = f.er.cross(f.etheta);
  return f;
}

// a_r e_r x e_r + a_t (I - e_r x e_r) as a Cartesian matrix.
inline CMat3 radial_anisotropic_matrix(const Vec3& x, cplx a_r, cplx a_t) {
  const Vec3 er = x.normalized();
  Mat3 proj = er * er.transpose();
  return a_r * proj.cast<cplx>() + a_t * (Mat3::Identity() - proj).cast<cplx>();
}

}  // namespace cmlens
