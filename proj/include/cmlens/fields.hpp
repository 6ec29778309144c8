#pragma once

// Field-level calculus: analytic sources, covariant field transforms under
// the radial maps, finite-difference Maxwell residuals, the Silver-Muller
// residual, boundary-trace push-forward, and the Stratton-Chu surface
// representation evaluator.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmlens/common.hpp"
#include "cmlens/geometry.hpp"
#include "cmlens/materials.hpp"
#include "cmlens/special.hpp"

namespace cmlens {

using VectorField = std::function<CVec3(const Vec3&)>;

// Time-harmonic pair with convention  curl E = i k mu H,  curl H = -i k eps E + j.
struct FieldPair {
  VectorField E;
  VectorField H;
  double k = 0.0;
};

// ---------------------------------------------------------------------------
// Sources.
// ---------------------------------------------------------------------------

struct SourceSpec {
  enum class Kind { electric_dipole, plane_wave };
  Kind kind = Kind::plane_wave;
  Vec3 position = Vec3::Zero();     // dipole location
  Vec3 direction = Vec3(0, 0, 1);   // plane-wave direction (unit)
  CVec3 moment = CVec3(1, 0, 0);    // dipole moment / plane-wave polarization
};

// Exact free-space electric dipole at x0 with moment p:
//   H = grad G x p,  E = (i/k)(k^2 G p + Hess G p),  G = e^{ikR}/(4 pi R).
inline void dipole_field(double k, const Vec3& x0, const CVec3& p, const Vec3& x, CVec3* E,
                         CVec3* H) {
  const Vec3 R = x - x0;
  const double r = R.norm();
  if (r == 0.0) throw std::domain_error("dipole_field: evaluation at the source point");
  const Vec3 rhat = R / r;
  const cplx ik(0.0, k);
  const cplx G = std::exp(ik * r) / (4.0 * pi * r);
  const cplx g1 = G * (ik - 1.0 / r);                                // dG/dr
  const cplx g2 = G * (-k * k - 2.0 * ik / r + 2.0 / (r * r));       // d2G/dr2
  const CVec3 gradG = g1 * rhat.cast<cplx>();
  const cplx rp = rhat.cast<cplx>().dot(p);  // rhat . p (no conjugation)
  const CVec3 hessp = g2 * rp * rhat.cast<cplx>() + (g1 / r) * (p - rp * rhat.cast<cplx>());
  if (H) *H = ccross(gradG, p);
  if (E) *E = cplx(0, 1) / k * (k * k * G * p + hessp);
}

inline FieldPair dipole_pair(double k, const Vec3& x0, const CVec3& p) {
  return {[k, x0, p](const Vec3& x) {
            CVec3 E;
            dipole_field(k, x0, p, x, &E, nullptr);
            return E;
          },
          [k, x0, p](const Vec3& x) {
            CVec3 H;
            dipole_field(k, x0, p, x, nullptr, &H);
            return H;
          },
          k};
}

// E = p e^{i k d.x},  H = d x p e^{i k d.x};  requires |d| = 1 and p _|_ d.
inline void plane_wave(double k, const Vec3& d, const CVec3& p, const Vec3& x, CVec3* E,
                       CVec3* H) {
  if (std::abs(d.norm() - 1.0) > 1e-12)
    throw std::domain_error("plane_wave: direction must be a unit vector");
  if (std::abs(d.cast<cplx>().dot(p)) > 1e-12 * p.norm())
    throw std::domain_error("plane_wave: polarization must be transverse");
  const cplx phase = std::exp(cplx(0.0, k * d.dot(x)));
  if (E) *E = p * phase;
  if (H) *H = ccross(d.cast<cplx>(), p) * phase;
}

inline FieldPair plane_wave_pair(double k, const Vec3& d, const CVec3& p) {
  return {[k, d, p](const Vec3& x) {
            CVec3 E;
            plane_wave(k, d, p, x, &E, nullptr);
            return E;
          },
          [k, d, p](const Vec3& x) {
            CVec3 H;
            plane_wave(k, d, p, x, nullptr, &H);
            return H;
          },
          k};
}

inline FieldPair incident_pair(const SourceSpec& src, double k) {
  if (src.kind == SourceSpec::Kind::plane_wave)
    return plane_wave_pair(k, src.direction, src.moment);
  return dipole_pair(k, src.position, src.moment);
}

// ---------------------------------------------------------------------------
// Covariant transform  (T*V)(x') = grad T^{-T}(x) V(x),  x' = T(x).
// ---------------------------------------------------------------------------

template <class Map>
CVec3 transform_field(const Map& T, const VectorField& V, const Vec3& xp) {
  const Vec3 x = T.inverse_eval(xp);
  const Mat3 J = T.jacobian(x);
  return J.transpose().cast<cplx>().fullPivLu().solve(V(x));
}

template <class Map>
FieldPair transform_pair(const Map& T, const FieldPair& pair) {
  return {[T, V = pair.E](const Vec3& xp) { return transform_field(T, V, xp); },
          [T, V = pair.H](const Vec3& xp) { return transform_field(T, V, xp); },
          pair.k};
}

// ---------------------------------------------------------------------------
// Finite-difference oracles.
// ---------------------------------------------------------------------------

// Default finite-difference step: 1e-4 times the local radius.
inline double default_fd_step(double r) { return 1e-4 * r; }

// Central-difference curl, O(h^2).
inline CVec3 fd_curl(const VectorField& V, const Vec3& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_curl: h must be > 0");
  CMat3 dV;  // dV(i, j) = d V_i / d x_j
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    const CVec3 diff = (V(x + e) - V(x - e)) / (2.0 * h);
    dV.col(j) = diff;
  }
  return CVec3(dV(2, 1) - dV(1, 2), dV(0, 2) - dV(2, 0), dV(1, 0) - dV(0, 1));
}

struct MaxwellResidual {
  CVec3 res_E;  // fd_curl(E) - i k mu H
  CVec3 res_H;  // fd_curl(H) + i k eps E - j
};

inline MaxwellResidual maxwell_residual(const FieldPair& pair, const TensorField& eps,
                                        const TensorField& mu, const VectorField& j,
                                        const Vec3& x, double h) {
  const cplx ik(0.0, pair.k);
  MaxwellResidual r;
  r.res_E = fd_curl(pair.E, x, h) - ik * (mu(x) * pair.H(x));
  r.res_H = fd_curl(pair.H, x, h) + ik * (eps(x) * pair.E(x));
  if (j) r.res_H -= j(x);
  return r;
}

// |E x rhat + H|; decays like 1/r^2 for outgoing fields, 1/r for incoming,
// stays O(1) for non-radiating fields.
inline double silver_muller_residual(const FieldPair& pair, const Vec3& x) {
  const Vec3 rhat = x.normalized();
  return (ccross(pair.E(x), rhat.cast<cplx>()) + pair.H(x)).norm();
}

// ---------------------------------------------------------------------------
// Boundary-trace push-forward on a sphere.
//
// For a map sending the sphere |x| = a radially onto |x'| = a', the surface
// push-forward of a tangential field is
//   T_* phi(x') = sign(det grad T) * (a/a') * phi(x),   x' = (a'/a) x.
// ---------------------------------------------------------------------------

template <class Map>
CVec3 boundary_trace_pushforward(const Map& T, const CVec3& phi, const Vec3& x) {
  const double a = x.norm();
  const Vec3 rhat = x / a;
  if (std::abs(rhat.cast<cplx>().dot(phi)) > 1e-10 * (phi.norm() + 1e-300))
    throw std::domain_error("boundary_trace_pushforward: field is not tangential");
  const Vec3 xp = T(x);
  const double ap = xp.norm();
  if ((xp - (ap / a) * x).norm() > 1e-12 * ap)
    throw std::domain_error("boundary_trace_pushforward: map is not radial on the sphere");
  const double sign = T.jacobian_det(x) < 0.0 ? -1.0 : 1.0;
  return sign * (a / ap) * phi;
}

// ---------------------------------------------------------------------------
// Stratton-Chu surface representation.
//
// For outgoing source-free fields outside the sphere |y| = rho and |x| > rho:
//   E(x) = -curl  I[E x nu] + (1/ik) curl curl I[H x nu]
//   H(x) = -curl  I[H x nu] - (1/ik) curl curl I[E x nu]
// with I[phi](x) = int_{|y|=rho} phi(y) G(x,y) ds(y), G = e^{ik|x-y|}/(4pi|x-y|).
// ---------------------------------------------------------------------------

struct StrattonChuResult {
  CVec3 E, H;
  bool underresolved = false;
  double quad_disagreement = 0.0;
};

namespace detail {

struct ChuAccum {
  CVec3 curl_e = CVec3::Zero(), curl_h = CVec3::Zero();
  CVec3 cc_e = CVec3::Zero(), cc_h = CVec3::Zero();
};

inline ChuAccum stratton_chu_accumulate(const FieldPair& pair, double rho, const Vec3& x,
                                        int n_theta, int n_phi) {
  const double k = pair.k;
  const cplx ik(0.0, k);
  const QuadratureRule1D gl = gauss_legendre(n_theta);
  ChuAccum acc;
  for (int i = 0; i < n_theta; ++i) {
    const double ct = gl.nodes[i];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int jn = 0; jn < n_phi; ++jn) {
      const double ph = 2.0 * pi * jn / n_phi;
      const Vec3 nu(st * std::cos(ph), st * std::sin(ph), ct);
      const Vec3 y = rho * nu;
      const double w = gl.weights[i] * (2.0 * pi / n_phi) * rho * rho;
      const CVec3 eXn = ccross(pair.E(y), nu.cast<cplx>());
      const CVec3 hXn = ccross(pair.H(y), nu.cast<cplx>());
      const Vec3 R = x - y;
      const double r = R.norm();
      const Vec3 rhat = R / r;
      const cplx G = std::exp(ik * r) / (4.0 * pi * r);
      const cplx g1 = G * (ik - 1.0 / r);
      const cplx g2 = G * (-k * k - 2.0 * ik / r + 2.0 / (r * r));
      const CVec3 gradG = g1 * rhat.cast<cplx>();
      auto hess = [&](const CVec3& v) -> CVec3 {
        const cplx rv = rhat.cast<cplx>().dot(v);
        return g2 * rv * rhat.cast<cplx>() + (g1 / r) * (v - rv * rhat.cast<cplx>());
      };
      // curl_x (G phi) = grad G x phi;  curlcurl (G phi) = k^2 G phi + Hess G phi
      acc.curl_e += w * ccross(gradG, eXn);
      acc.curl_h += w * ccross(gradG, hXn);
      acc.cc_e += w * (k * k * G * eXn + hess(eXn));
      acc.cc_h += w * (k * k * G * hXn + hess(hXn));
    }
  }
  return acc;
}

}  // namespace detail

inline StrattonChuResult stratton_chu_eval(const FieldPair& pair, double rho, const Vec3& x,
                                           int n_theta = 32, int n_phi = 64,
                                           double warn_tol = 1e-8) {
  if (x.norm() <= rho)
    throw std::domain_error("stratton_chu_eval: evaluation point must lie outside the sphere");
  const cplx ik(0.0, pair.k);
  const auto acc = detail::stratton_chu_accumulate(pair, rho, x, n_theta, n_phi);
  StrattonChuResult out;
  out.E = -acc.curl_e + acc.cc_h / ik;
  out.H = -acc.curl_h - acc.cc_e / ik;

  const auto coarse = detail::stratton_chu_accumulate(pair, rho, x, n_theta / 2, n_phi / 2);
  const CVec3 Ec = -coarse.curl_e + coarse.cc_h / ik;
  const CVec3 Hc = -coarse.curl_h - coarse.cc_e / ik;
  const double scale = std::max(1e-300, out.E.norm() + out.H.norm());
  out.quad_disagreement = ((out.E - Ec).norm() + (out.H - Hc).norm()) / scale;
  out.underresolved = out.quad_disagreement > warn_tol;
  return out;
}

// ---------------------------------------------------------------------------
// Field probes as CSV: x,y,z, Re/Im of E1..E3, H1..H3.
// ---------------------------------------------------------------------------

inline void write_field_csv(const std::string& path, const std::vector<Vec3>& points,
                            const FieldPair& pair) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_field_csv: cannot open " + path);
  std::fprintf(f,
               "x,y,z,re_E1,im_E1,re_E2,im_E2,re_E3,im_E3,re_H1,im_H1,re_H2,im_H2,re_H3,im_H3\n");
  for (const Vec3& x : points) {
    const CVec3 E = pair.E(x), H = pair.H(x);
    std::fprintf(f, "%.17g,%.17g,%.17g", x.x(), x.y(), x.z());
    for (int i = 0; i < 3; ++i) std::fprintf(f, ",%.17g,%.17g", E[i].real(), E[i].imag());
    for (int i = 0; i < 3; ++i) std::fprintf(f, ",%.17g,%.17g", H[i].real(), H[i].imag());
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace cmlens
