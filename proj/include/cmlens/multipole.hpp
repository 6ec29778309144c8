#pragma once

// Vector spherical harmonics, the vacuum multipole mode fields, and the
// projection of incident fields onto regular modes by surface quadrature.
//
// Conventions (orthonormal on the unit sphere):
//   P_nm = Y_nm e_r
//   B_nm = (tau e_th + i pi e_ph) e^{im phi} / sqrt(n(n+1))
//   C_nm = e_r x B_nm = (-i pi e_th + tau e_ph) e^{im phi} / sqrt(n(n+1))
// with tau = dP~/dtheta and pi = m P~/sin(theta).
//
// Mode fields at wavenumber k (x = k r, f = j_n or h1_n, F = x f):
//   TE: E = f(x) C_nm
//       H = i sqrt(n(n+1)) (F(x)/x^2) P_nm + i (F'(x)/x) B_nm
//   TM: E = -i sqrt(n(n+1)) (F(x)/x^2) P_nm - i (F'(x)/x) B_nm
//       H = f(x) C_nm
// so that curl E = i k H and curl H = -i k E hold in vacuum.

#include <vector>

#include "cmlens/common.hpp"
#include "cmlens/fields.hpp"
#include "cmlens/special.hpp"

namespace cmlens {

enum class Polarization { TE, TM };

struct ModeIndex {
  int n = 1;
  Polarization pol = Polarization::TE;
};

enum class RadialKind { regular, outgoing, incoming };

// ---------------------------------------------------------------------------
// Angular basis at one direction.
// ---------------------------------------------------------------------------

class VshEvaluator {
 public:
  VshEvaluator(int n_max, const Vec3& xhat)
      : frame_(spherical_frame(xhat)), table_(n_max, std::cos(frame_.theta)) {}

  CVec3 P(int n, int m) const { return table_.p(n, m) * azimuth_(m) * frame_.er.cast<cplx>(); }

  CVec3 B(int n, int m) const {
    const double norm = 1.0 / std::sqrt(n * (n + 1.0));
    const cplx e = azimuth_(m) * norm;
    return e * (table_.tau(n, m) * frame_.etheta.cast<cplx>() +
                cplx(0, 1) * table_.pi_m(n, m) * frame_.ephi.cast<cplx>());
  }

  CVec3 C(int n, int m) const {
    const double norm = 1.0 / std::sqrt(n * (n + 1.0));
    const cplx e = azimuth_(m) * norm;
    return e * (-cplx(0, 1) * table_.pi_m(n, m) * frame_.etheta.cast<cplx>() +
                table_.tau(n, m) * frame_.ephi.cast<cplx>());
  }

  const SphericalFrame& frame() const { return frame_; }

 private:
  cplx azimuth_(int m) const { return std::polar(1.0, m * frame_.phi); }
  SphericalFrame frame_;
  LegendreTable table_;
};

// ---------------------------------------------------------------------------
// Radial profiles of the vacuum modes.
// ---------------------------------------------------------------------------

// Tangential-amplitude pair (u, v): u multiplies C (TE) or B (TM) in E,
// v multiplies B (TE) or C (TM) in H.
struct State2 {
  cplx u, v;
};

namespace detail {

inline Riccati riccati_of_kind(int n, RadialKind kind, cplx x) {
  switch (kind) {
    case RadialKind::regular: return riccati_psi(n, x);
    case RadialKind::outgoing: return riccati_xi(n, x);
    case RadialKind::incoming: {
      const Riccati p = riccati_psi(n, x), c = riccati_chi(n, x);
      return {p.value - cplx(0, 1) * c.value, p.deriv - cplx(0, 1) * c.deriv};
    }
  }
  throw std::logic_error("riccati_of_kind");
}

}  // namespace detail

inline State2 vacuum_mode_state(int n, Polarization pol, RadialKind kind, double k, double r) {
  const cplx x(k * r, 0.0);
  const Riccati f = detail::riccati_of_kind(n, kind, x);
  const cplx fn = f.value / x;  // j_n, h1_n or h2_n
  if (pol == Polarization::TE) return {fn, cplx(0, 1) * f.deriv / x};
  return {-cplx(0, 1) * f.deriv / x, fn};
}

// Full vector mode field; E or H may be null.
inline void vacuum_mode_field(int n, int m, Polarization pol, RadialKind kind, double k,
                              const Vec3& x, CVec3* E, CVec3* H) {
  const double r = x.norm();
  const cplx z(k * r, 0.0);
  const Riccati f = detail::riccati_of_kind(n, kind, z);
  const cplx fn = f.value / z;
  const double lam = std::sqrt(n * (n + 1.0));
  const VshEvaluator vsh(n, x.normalized());
  const CVec3 P = vsh.P(n, m), B = vsh.B(n, m), C = vsh.C(n, m);
  const cplx radial = cplx(0, 1) * lam * f.value / (z * z);
  const cplx tangent = cplx(0, 1) * f.deriv / z;
  if (pol == Polarization::TE) {
    if (E) *E = fn * C;
    if (H) *H = radial * P + tangent * B;
  } else {
    if (E) *E = -radial * P - tangent * B;
    if (H) *H = fn * C;
  }
}

// ---------------------------------------------------------------------------
// Sphere quadrature: Gauss-Legendre in cos(theta) x trapezoid in phi.
// Weights sum to 4 pi.
// ---------------------------------------------------------------------------

struct SphereQuadrature {
  struct Node {
    Vec3 xhat;
    double weight;
  };
  std::vector<Node> nodes;

  SphereQuadrature(int n_theta, int n_phi) {
    const QuadratureRule1D gl = gauss_legendre(n_theta);
    nodes.reserve(static_cast<std::size_t>(n_theta) * n_phi);
    for (int i = 0; i < n_theta; ++i) {
      const double ct = gl.nodes[i];
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int j = 0; j < n_phi; ++j) {
        const double ph = 2.0 * pi * j / n_phi;
        nodes.push_back(
            {Vec3(st * std::cos(ph), st * std::sin(ph), ct), gl.weights[i] * 2.0 * pi / n_phi});
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Incident-field expansion.
// ---------------------------------------------------------------------------

// Coefficients of the regular expansion: V = sum a_{nm,pol} Mode_{nm,pol}.
class MultipoleCoefficients {
 public:
  MultipoleCoefficients(double k, int n_max)
      : k_(k), n_max_(n_max), a_te_(slots_(), cplx(0)), a_tm_(slots_(), cplx(0)) {}

  double k() const { return k_; }
  int n_max() const { return n_max_; }

  cplx& at(int n, int m, Polarization pol) {
    return (pol == Polarization::TE) ? a_te_[idx_(n, m)] : a_tm_[idx_(n, m)];
  }
  cplx at(int n, int m, Polarization pol) const {
    return (pol == Polarization::TE) ? a_te_[idx_(n, m)] : a_tm_[idx_(n, m)];
  }

  // sum_m |a_nm|^2 for one (n, pol)
  double mode_weight(int n, Polarization pol) const {
    double w = 0.0;
    for (int m = -n; m <= n; ++m) w += std::norm(at(n, m, pol));
    return w;
  }
  double band_weight(int n) const {
    return mode_weight(n, Polarization::TE) + mode_weight(n, Polarization::TM);
  }
  double total_weight() const {
    double w = 0.0;
    for (int n = 1; n <= n_max_; ++n) w += band_weight(n);
    return w;
  }

  // Squared magnitude of the unit regular mode's tangential state at radius
  // r: |u|^2 + |v|^2.  Multiplying |a|^2 by this gives the mode's actual
  // field content at that radius, the quantity that decays for physical
  // sources and weights all error norms.
  double mode_strength2(int n, double r) const {
    const State2 s = vacuum_mode_state(n, Polarization::TE, RadialKind::regular, k_, r);
    return std::norm(s.u) + std::norm(s.v);
  }
  double content_weight(int n, Polarization pol, double r) const {
    return mode_weight(n, pol) * mode_strength2(n, r);
  }
  double band_content(int n, double r) const {
    return band_weight(n) * mode_strength2(n, r);
  }
  double total_content(double r) const {
    double w = 0.0;
    for (int n = 1; n <= n_max_; ++n) w += band_content(n, r);
    return w;
  }

  bool truncation_warning = false;
  double tail_fraction = 0.0;

 private:
  std::size_t slots_() const { return static_cast<std::size_t>(n_max_ + 1) * (n_max_ + 1); }
  std::size_t idx_(int n, int m) const {
    if (n < 1 || n > n_max_ || std::abs(m) > n)
      throw std::out_of_range("MultipoleCoefficients: bad (n, m)");
    return static_cast<std::size_t>(n) * (n + 1) + m;
  }
  double k_;
  int n_max_;
  std::vector<cplx> a_te_, a_tm_;
};

// Projects the incident field of a source onto the regular modes on the
// sphere |x| = projection_radius, which must lie inside the source-free ball.
// Both tangential projections of E and H are combined in least squares, so
// zeros of individual radial functions cannot poison the extraction.
inline MultipoleCoefficients expand_field_to_multipoles(const FieldPair& field, double k,
                                                        int n_max, double projection_radius,
                                                        int n_theta = 0, double tail_tol = 1e-10,
                                                        double noise_floor = 1e-13) {
  if (n_max < 1) throw std::invalid_argument("expand_field_to_multipoles: n_max must be >= 1");
  if (n_theta <= 0) n_theta = n_max + 8;
  const SphereQuadrature quad(n_theta, 2 * n_theta);
  MultipoleCoefficients out(k, n_max);

  struct Proj {
    cplx eC = 0, hB = 0, eB = 0, hC = 0;
  };
  std::vector<Proj> proj(static_cast<std::size_t>(n_max + 1) * (n_max + 1));
  auto pidx = [n_max](int n, int m) { return static_cast<std::size_t>(n) * (n + 1) + m; };

  double field_scale2 = 0.0;  // total |E|^2 + |H|^2 on the sphere
  for (const auto& node : quad.nodes) {
    const Vec3 x = projection_radius * node.xhat;
    const CVec3 E = field.E(x), H = field.H(x);
    field_scale2 += node.weight * (E.squaredNorm() + H.squaredNorm());
    const VshEvaluator vsh(n_max, node.xhat);
    for (int n = 1; n <= n_max; ++n) {
      for (int m = -n; m <= n; ++m) {
        const CVec3 B = vsh.B(n, m), C = vsh.C(n, m);
        Proj& p = proj[pidx(n, m)];
        // <V, W> = int V . conj(W); Eigen's dot conjugates its object
        p.eC += node.weight * C.dot(E);
        p.hB += node.weight * B.dot(H);
        p.eB += node.weight * B.dot(E);
        p.hC += node.weight * C.dot(H);
      }
    }
  }

  // Least squares over the two tangential projections; extracting a mode
  // whose radial functions are tiny at the projection radius amplifies
  // quadrature noise, so coefficients whose field contribution on the
  // sphere sits below the noise floor are zeroed.
  const double noise2 = noise_floor * noise_floor * field_scale2;
  for (int n = 1; n <= n_max; ++n) {
    const State2 te = vacuum_mode_state(n, Polarization::TE, RadialKind::regular, k,
                                        projection_radius);
    const State2 tm = vacuum_mode_state(n, Polarization::TM, RadialKind::regular, k,
                                        projection_radius);
    const double te_den = std::norm(te.u) + std::norm(te.v);
    const double tm_den = std::norm(tm.u) + std::norm(tm.v);
    for (int m = -n; m <= n; ++m) {
      const Proj& p = proj[pidx(n, m)];
      // E_C = a j_n, H_B = a i psi'/x  (TE);  E_B = a (-i psi'/x), H_C = a j_n (TM)
      cplx aTE = (std::conj(te.u) * p.eC + std::conj(te.v) * p.hB) / te_den;
      cplx aTM = (std::conj(tm.u) * p.eB + std::conj(tm.v) * p.hC) / tm_den;
      if (std::norm(aTE) * te_den < noise2) aTE = 0.0;
      if (std::norm(aTM) * tm_den < noise2) aTM = 0.0;
      out.at(n, m, Polarization::TE) = aTE;
      out.at(n, m, Polarization::TM) = aTM;
    }
  }

  const double total = out.total_content(projection_radius);
  if (total > 0.0) {
    out.tail_fraction = std::sqrt(out.band_content(n_max, projection_radius) / total);
    out.truncation_warning = out.tail_fraction > tail_tol;
  }
  return out;
}

inline MultipoleCoefficients expand_source_to_multipoles(const SourceSpec& src, double k,
                                                         int n_max, double projection_radius,
                                                         int n_theta = 0,
                                                         double tail_tol = 1e-10) {
  if (src.kind == SourceSpec::Kind::electric_dipole &&
      src.position.norm() <= projection_radius)
    throw std::domain_error("expand_source_to_multipoles: dipole inside the projection sphere");
  return expand_field_to_multipoles(incident_pair(src, k), k, n_max, projection_radius, n_theta,
                                    tail_tol);
}

// Mode sum of the regular (incident) expansion; oracle for the projection.
inline void field_from_multipoles(const MultipoleCoefficients& c, RadialKind kind, const Vec3& x,
                                  CVec3* E, CVec3* H) {
  CVec3 accE = CVec3::Zero(), accH = CVec3::Zero();
  const double r = x.norm();
  const cplx z(c.k() * r, 0.0);
  const VshEvaluator vsh(c.n_max(), x.normalized());
  for (int n = 1; n <= c.n_max(); ++n) {
    const Riccati f = detail::riccati_of_kind(n, kind, z);
    const cplx fn = f.value / z;
    const double lam = std::sqrt(n * (n + 1.0));
    const cplx radial = cplx(0, 1) * lam * f.value / (z * z);
    const cplx tangent = cplx(0, 1) * f.deriv / z;
    for (int m = -n; m <= n; ++m) {
      const cplx aTE = c.at(n, m, Polarization::TE);
      const cplx aTM = c.at(n, m, Polarization::TM);
      if (aTE == cplx(0) && aTM == cplx(0)) continue;
      const CVec3 P = vsh.P(n, m), B = vsh.B(n, m), C = vsh.C(n, m);
      accE += aTE * (fn * C) + aTM * (-radial * P - tangent * B);
      accH += aTE * (radial * P + tangent * B) + aTM * (fn * C);
    }
  }
  if (E) *E = accE;
  if (H) *H = accH;
}

}  // namespace cmlens
