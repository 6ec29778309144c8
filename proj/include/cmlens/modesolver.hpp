#pragma once

// Time-harmonic Maxwell solver for radially layered, radially anisotropic
// media by vector-spherical-harmonic mode reduction.
//
// Per mode (n, pol) the tangential amplitudes (u, v) satisfy a first-order
// 2x2 system d/dr (u, v) = A(r) (u, v):
//   TE:  u' = -u/r - i k mu_t v
//        v' = -i k (eps_t - n(n+1)/(k^2 r^2 mu_r)) u - v/r
//   TM:  u' = -u/r + i k (mu_t - n(n+1)/(k^2 r^2 eps_r)) v
//        v' =  i k eps_t u - v/r
// (u, v) are continuous across material interfaces.  In vacuum, w = r u (TE)
// or w = r v (TM) solves w'' + (k^2 - n(n+1)/r^2) w = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmlens/common.hpp"
#include "cmlens/materials.hpp"
#include "cmlens/multipole.hpp"
#include "cmlens/special.hpp"

namespace cmlens {

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4) for small complex systems.
// ---------------------------------------------------------------------------

class StiffnessError : public std::runtime_error {
 public:
  explicit StiffnessError(double radius)
      : std::runtime_error("integration step size underflow at r = " + std::to_string(radius)),
        radius_reached(radius) {}
  double radius_reached;
};

template <std::size_t N, class RHS>
std::array<cplx, N> integrate_ode(const RHS& rhs, double t0, double t1, std::array<cplx, N> y,
                                  double rtol, double atol = 1e-300) {
  if (t0 == t1) return y;
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  double h = dir * span / 64.0;
  const double hmin = span * 1e-14;

  using St = std::array<cplx, N>;
  auto axpy = [](St& a, double c, const St& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += c * b[i];
  };

  St k1;
  rhs(t, y, k1);
  int rejected_in_row = 0;
  while (dir * (t1 - t) > 0.0) {
    if (dir * (t + h - t1) > 0.0) h = t1 - t;
    if (std::abs(h) < hmin) throw StiffnessError(t);

    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200, e6 = 11.0 / 84 - 187.0 / 2100,
                            e7 = -1.0 / 40;

    St k2, k3, k4, k5, k6, k7, ytmp;

    ytmp = y;
    axpy(ytmp, h * a21, k1);
    rhs(t + h / 5, ytmp, k2);
    ytmp = y;
    axpy(ytmp, h * a31, k1);
    axpy(ytmp, h * a32, k2);
    rhs(t + 3 * h / 10, ytmp, k3);
    ytmp = y;
    axpy(ytmp, h * a41, k1);
    axpy(ytmp, h * a42, k2);
    axpy(ytmp, h * a43, k3);
    rhs(t + 4 * h / 5, ytmp, k4);
    ytmp = y;
    axpy(ytmp, h * a51, k1);
    axpy(ytmp, h * a52, k2);
    axpy(ytmp, h * a53, k3);
    axpy(ytmp, h * a54, k4);
    rhs(t + 8 * h / 9, ytmp, k5);
    ytmp = y;
    axpy(ytmp, h * a61, k1);
    axpy(ytmp, h * a62, k2);
    axpy(ytmp, h * a63, k3);
    axpy(ytmp, h * a64, k4);
    axpy(ytmp, h * a65, k5);
    rhs(t + h, ytmp, k6);
    St ynew = y;
    axpy(ynew, h * b1, k1);
    axpy(ynew, h * b3, k3);
    axpy(ynew, h * b4, k4);
    axpy(ynew, h * b5, k5);
    axpy(ynew, h * b6, k6);
    rhs(t + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const cplx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                          e7 * k7[i]);
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double q = std::abs(e) / sc;
      err += q * q;
    }
    err = std::sqrt(err / N);

    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      rejected_in_row = 0;
    } else {
      ++rejected_in_row;
      if (rejected_in_row > 200) throw StiffnessError(t);
    }
    const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
    h *= fac;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Per-mode radial reduction.
// ---------------------------------------------------------------------------

struct RadialOdeCoeffs {
  RadialTensor eps, mu;
  double k = 1.0;
  ModeIndex mode;

  Eigen::Matrix2cd A(double r) const {
    const double lam = mode.n * (mode.n + 1.0);
    const cplx ik(0.0, k);
    const cplx eps_r = eps.radial(r), eps_t = eps.tangential(r);
    const cplx mu_r = mu.radial(r), mu_t = mu.tangential(r);
    constexpr double tiny = 1e-200;
    if (std::abs(eps_r) < tiny || std::abs(eps_t) < tiny || std::abs(mu_r) < tiny ||
        std::abs(mu_t) < tiny)
      throw std::domain_error("radial_ode_coeffs: vanishing tensor entry at r = " +
                              std::to_string(r));
    Eigen::Matrix2cd m;
    if (mode.pol == Polarization::TE) {
      m(0, 0) = -1.0 / r;
      m(0, 1) = -ik * mu_t;
      m(1, 0) = -ik * (eps_t - lam / (k * k * r * r * mu_r));
      m(1, 1) = -1.0 / r;
    } else {
      m(0, 0) = -1.0 / r;
      m(0, 1) = ik * (mu_t - lam / (k * k * r * r * eps_r));
      m(1, 0) = ik * eps_t;
      m(1, 1) = -1.0 / r;
    }
    return m;
  }

  void apply(double r, const State2& y, State2& dy) const {
    const Eigen::Matrix2cd m = A(r);
    dy.u = m(0, 0) * y.u + m(0, 1) * y.v;
    dy.v = m(1, 0) * y.u + m(1, 1) * y.v;
  }
};

inline RadialOdeCoeffs radial_ode_coeffs(const RadialTensor& eps, const RadialTensor& mu, double k,
                                         ModeIndex mode) {
  if (!(k > 0.0)) throw std::invalid_argument("radial_ode_coeffs: k must be > 0");
  if (mode.n < 1) throw std::invalid_argument("radial_ode_coeffs: n must be >= 1");
  return {eps, mu, k, mode};
}

// Adaptive integration of one shell; default tolerance 1e-10 relative.
inline State2 integrate_shell(const RadialOdeCoeffs& coeffs, double r_in, double r_out,
                              const State2& state, double tol = 1e-10) {
  if (r_in == r_out) return state;
  std::array<cplx, 2> y{state.u, state.v};
  auto rhs = [&coeffs](double r, const std::array<cplx, 2>& s, std::array<cplx, 2>& d) {
    State2 in{s[0], s[1]}, out;
    coeffs.apply(r, in, out);
    d[0] = out.u;
    d[1] = out.v;
  };
  y = integrate_ode<2>(rhs, r_in, r_out, y, tol);
  return {y[0], y[1]};
}

// ---------------------------------------------------------------------------
// Scattering by the layered medium.
// ---------------------------------------------------------------------------

// sqrt(eps mu) on the passive branch: Im >= 0, Re > 0 when lossless.
inline cplx passive_index(cplx eps, cplx mu) {
  cplx w = std::sqrt(eps * mu);
  if (w.imag() < 0.0 || (w.imag() == 0.0 && w.real() < 0.0)) w = -w;
  return w;
}

// Regular solution of the isotropic-constant ball at radius r.
inline State2 isotropic_regular_state(int n, Polarization pol, double k, cplx eps, cplx mu,
                                      double r) {
  const cplx idx = passive_index(eps, mu);
  const cplx kc = k * idx;
  const cplx x = kc * r;
  const Riccati p = riccati_psi(n, x);
  if (pol == Polarization::TE) {
    const cplx Y = kc / (k * mu);
    return {p.value / x, cplx(0, 1) * Y * p.deriv / x};
  }
  const cplx Z = kc / (k * eps);
  return {-cplx(0, 1) * Z * p.deriv / x, p.value / x};
}

struct SolverOptions {
  double rtol = 1e-12;             // integration tolerance inside scattering solves
  double resonance_threshold = 1e12;
  double inner_start_fraction = 1e-3;  // start radius for non-constant cores
};

struct ModeSolveRecord {
  ModeIndex mode;
  cplx s = 0.0;       // scattering coefficient for a unit regular incident mode
  cplx gamma = 0.0;   // scale applied to the interior chain
  bool resonant = false;
  double matching_condition = 0.0;
  // chain(r) = amp[i] * z_i(r), z_i integrated from entry_state[i] at entry_r[i]
  std::vector<double> entry_r;
  std::vector<State2> entry_state;
  std::vector<double> amp;
  bool iso_core = false;
  cplx core_eps, core_mu;
};

class LayeredModeSolver {
 public:
  LayeredModeSolver(LayeredMedium medium, double k, SolverOptions opt = {})
      : medium_(std::move(medium)), k_(k), opt_(opt) {
    if (!(k > 0.0)) throw std::invalid_argument("LayeredModeSolver: k must be > 0");
    if (medium_.boundaries().empty())
      throw std::invalid_argument("LayeredModeSolver: medium has no interior shell");
    if (medium_.delta() == 0.0 && medium_.has_sign_changing_shell())
      throw std::invalid_argument(
          "LayeredModeSolver: sign-changing shells require delta > 0 (the limit problem is "
          "defined only as delta -> 0)");
  }

  const LayeredMedium& medium() const { return medium_; }
  double k() const { return k_; }

  RadialOdeCoeffs shell_coeffs(std::size_t shell, ModeIndex mode) const {
    auto [eps, mu] = medium_.shell_tensors(shell);
    return radial_ode_coeffs(eps, mu, k_, mode);
  }

  ModeSolveRecord solve(ModeIndex mode) const {
    ModeSolveRecord rec;
    rec.mode = mode;
    const auto& b = medium_.boundaries();
    const std::size_t nshell = b.size();  // finite shells

    // Regular chain start in the innermost shell.
    State2 z;
    double r_entry;
    std::size_t first_integrated_shell;
    if (medium_.shell_is_isotropic_constant(0)) {
      const auto [eps, mu] = medium_.shell_tensors(0);
      rec.iso_core = true;
      rec.core_eps = eps.radial(b[0]);
      rec.core_mu = mu.radial(b[0]);
      z = isotropic_regular_state(mode.n, mode.pol, k_, rec.core_eps, rec.core_mu, b[0]);
      r_entry = b[0];
      first_integrated_shell = 1;
    } else {
      r_entry = opt_.inner_start_fraction * b[0];
      z = indicial_start_(mode, r_entry);
      first_integrated_shell = 0;
    }

    double amp = normalize_(z);
    rec.entry_r.push_back(r_entry);
    rec.entry_state.push_back(z);
    rec.amp.push_back(amp);

    double r_cur = r_entry;
    for (std::size_t i = first_integrated_shell; i < nshell; ++i) {
      const RadialOdeCoeffs coeffs = shell_coeffs(i, mode);
      z = integrate_shell(coeffs, r_cur, b[i], z, opt_.rtol);
      r_cur = b[i];
      const double scale = normalize_(z);
      amp *= scale;
      rec.entry_r.push_back(r_cur);
      rec.entry_state.push_back(z);
      rec.amp.push_back(amp);
    }

    // Match at the outer boundary against vacuum regular + s * outgoing.
    const double Rb = b.back();
    const State2 w{amp * z.u, amp * z.v};
    const State2 reg = vacuum_mode_state(mode.n, mode.pol, RadialKind::regular, k_, Rb);
    const State2 out = vacuum_mode_state(mode.n, mode.pol, RadialKind::outgoing, k_, Rb);
    const cplx det = -w.u * out.v + out.u * w.v;
    const double mag = std::abs(w.u) * std::abs(out.v) + std::abs(out.u) * std::abs(w.v);
    rec.matching_condition = mag / std::max(std::abs(det), 1e-300);
    rec.resonant = rec.matching_condition > opt_.resonance_threshold;
    rec.gamma = (out.u * reg.v - reg.u * out.v) / det;
    rec.s = (w.u * reg.v - reg.u * w.v) / det;
    return rec;
  }

  // Physical (u, v) for a unit regular incident mode at radius r.
  State2 eval(const ModeSolveRecord& rec, double r) const {
    const auto& b = medium_.boundaries();
    if (r >= b.back()) {
      const State2 reg = vacuum_mode_state(rec.mode.n, rec.mode.pol, RadialKind::regular, k_, r);
      const State2 out = vacuum_mode_state(rec.mode.n, rec.mode.pol, RadialKind::outgoing, k_, r);
      return {reg.u + rec.s * out.u, reg.v + rec.s * out.v};
    }
    const std::size_t shell = medium_.shell_index(r);
    if (shell == 0 && rec.iso_core) {
      // the chain in the core is the isotropic closed form itself
      const State2 z = isotropic_regular_state(rec.mode.n, rec.mode.pol, k_, rec.core_eps,
                                               rec.core_mu, r);
      return {rec.gamma * z.u, rec.gamma * z.v};
    }
    if (!rec.iso_core && shell == 0 && r < rec.entry_r[0]) {
      // below the indicial start: extrapolate by the leading power
      const State2 z0 = rec.entry_state[0];
      const cplx p = indicial_power_(rec.mode, rec.entry_r[0]);
      const cplx ratio = std::pow(cplx(r / rec.entry_r[0], 0.0), p);
      const double inv = rec.entry_r[0] / r;
      const cplx g = rec.gamma * rec.amp[0];
      if (rec.mode.pol == Polarization::TE) return {g * z0.u * ratio, g * z0.v * ratio * inv};
      return {g * z0.u * ratio * inv, g * z0.v * ratio};
    }
    // chain record whose entry radius is the inner boundary of this shell
    const std::size_t rec_idx = rec.iso_core ? shell - 1 : shell;
    if (rec_idx >= rec.entry_r.size())
      throw std::domain_error("LayeredModeSolver::eval: radius outside the recorded chain");
    const RadialOdeCoeffs coeffs = shell_coeffs(shell, rec.mode);
    State2 z = integrate_shell(coeffs, rec.entry_r[rec_idx], r, rec.entry_state[rec_idx],
                               opt_.rtol);
    const double a = rec.amp[rec_idx];
    return {rec.gamma * a * z.u, rec.gamma * a * z.v};
  }

  const SolverOptions& options() const { return opt_; }

 private:
  static double normalize_(State2& z) {
    const double s = std::max(std::abs(z.u), std::abs(z.v));
    if (s == 0.0) return 1.0;
    z.u /= s;
    z.v /= s;
    return s;
  }

  cplx indicial_power_(ModeIndex mode, double r) const {
    const auto [eps, mu] = medium_.shell_tensors(0);
    const double lam = mode.n * (mode.n + 1.0);
    const cplx ratio = (mode.pol == Polarization::TE) ? mu.tangential(r) / mu.radial(r)
                                                      : eps.tangential(r) / eps.radial(r);
    return 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * lam * ratio));
  }

  State2 indicial_start_(ModeIndex mode, double r) const {
    const auto [eps, mu] = medium_.shell_tensors(0);
    const double lam = mode.n * (mode.n + 1.0);
    const cplx p = indicial_power_(mode, r);
    if (mode.pol == Polarization::TE) {
      const cplx u = 1.0;
      const cplx v = cplx(0, 1) * (p + 1.0) / (k_ * mu.tangential(r) * r) * u;
      return {u, v};
    }
    const cplx v = 1.0;
    const cplx u = -cplx(0, 1) * lam * v / (k_ * eps.radial(r) * p * r);
    return {u, v};
  }

  LayeredMedium medium_;
  double k_;
  SolverOptions opt_;
};

// ---------------------------------------------------------------------------
// Spectra.
// ---------------------------------------------------------------------------

struct ScatteringSpectrum {
  double k = 0.0;
  int n_max = 0;
  std::vector<cplx> te, tm;  // index n-1
  std::vector<ModeIndex> resonances;

  cplx coeff(ModeIndex m) const {
    return (m.pol == Polarization::TE) ? te.at(m.n - 1) : tm.at(m.n - 1);
  }
  double max_abs() const {
    double v = 0.0;
    for (const cplx s : te) v = std::max(v, std::abs(s));
    for (const cplx s : tm) v = std::max(v, std::abs(s));
    return v;
  }
};

inline ScatteringSpectrum scattering_coefficients(const LayeredMedium& medium, double k,
                                                  int n_max, SolverOptions opt = {}) {
  if (n_max < 1) throw std::invalid_argument("scattering_coefficients: n_max must be >= 1");
  LayeredModeSolver solver(medium, k, opt);
  ScatteringSpectrum sp;
  sp.k = k;
  sp.n_max = n_max;
  sp.te.resize(n_max);
  sp.tm.resize(n_max);
  for (int n = 1; n <= n_max; ++n) {
    for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
      const ModeSolveRecord rec = solver.solve({n, pol});
      (pol == Polarization::TE ? sp.te[n - 1] : sp.tm[n - 1]) = rec.s;
      if (rec.resonant) sp.resonances.push_back({n, pol});
    }
  }
  return sp;
}

// ---------------------------------------------------------------------------
// Closed-form layered Mie oracle (isotropic constant layers, no integration).
// ---------------------------------------------------------------------------

struct IsotropicLayer {
  double outer_radius;
  cplx eps, mu;
};

inline ScatteringSpectrum mie_isotropic_oracle(const std::vector<IsotropicLayer>& layers, double k,
                                               int n_max) {
  if (layers.empty()) throw std::invalid_argument("mie_isotropic_oracle: no layers");
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].outer_radius <= layers[i - 1].outer_radius)
      throw std::invalid_argument("mie_isotropic_oracle: radii must increase");

  ScatteringSpectrum sp;
  sp.k = k;
  sp.n_max = n_max;
  sp.te.resize(n_max);
  sp.tm.resize(n_max);

  // Column basis in a layer at radius r: (u, v) of {psi, chi} (interior) or
  // {psi, xi} (exterior vacuum) radial solutions.
  auto basis = [k](int n, Polarization pol, cplx eps, cplx mu, double r,
                   bool exterior) -> Eigen::Matrix2cd {
    const cplx kc = exterior ? cplx(k, 0.0) : k * passive_index(eps, mu);
    const cplx x = kc * r;
    const Riccati c0 = riccati_psi(n, x);
    const Riccati c1 = exterior ? riccati_xi(n, x) : riccati_chi(n, x);
    Eigen::Matrix2cd M;
    if (pol == Polarization::TE) {
      const cplx Y = kc / (k * mu);
      M << c0.value / x, c1.value / x, cplx(0, 1) * Y * c0.deriv / x,
          cplx(0, 1) * Y * c1.deriv / x;
    } else {
      const cplx Z = kc / (k * eps);
      M << -cplx(0, 1) * Z * c0.deriv / x, -cplx(0, 1) * Z * c1.deriv / x, c0.value / x,
          c1.value / x;
    }
    return M;
  };

  // Cramer solve: the basis columns span many orders of magnitude at large
  // n, where pivoted LU rank thresholds misclassify the system as singular;
  // the 2x2 determinant (a Wronskian) is well separated from zero.
  auto solve2 = [](const Eigen::Matrix2cd& M, const Eigen::Vector2cd& r) {
    const cplx det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    return Eigen::Vector2cd((r(0) * M(1, 1) - M(0, 1) * r(1)) / det,
                            (M(0, 0) * r(1) - r(0) * M(1, 0)) / det);
  };

  for (int n = 1; n <= n_max; ++n) {
    for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
      Eigen::Vector2cd c(1.0, 0.0);
      for (std::size_t i = 0; i < layers.size(); ++i) {
        const double b = layers[i].outer_radius;
        const bool outer_is_vacuum = (i + 1 == layers.size());
        const Eigen::Matrix2cd Mi = basis(n, pol, layers[i].eps, layers[i].mu, b, false);
        const Eigen::Matrix2cd Mo =
            outer_is_vacuum ? basis(n, pol, 1.0, 1.0, b, true)
                            : basis(n, pol, layers[i + 1].eps, layers[i + 1].mu, b, false);
        c = solve2(Mo, Mi * c);
      }
      const cplx s = c(1) / c(0);
      (pol == Polarization::TE ? sp.te[n - 1] : sp.tm[n - 1]) = s;
    }
  }
  return sp;
}

// Spectrum of the magnified-object medium.  Isotropic-constant objects go
// through the closed-form oracle; general radial objects through the ODE
// path on the assembled hat medium.
inline ScatteringSpectrum hat_spectrum(const LensRadii& L, const ObjectMedium& object, double k,
                                       int n_max, SolverOptions opt = {}) {
  if (object.eps.is_isotropic_constant() && object.mu.is_isotropic_constant()) {
    const cplx eo = object.eps.radial(1.0), mo = object.mu.radial(1.0);
    return mie_isotropic_oracle({{L.m * L.r0, eo / L.m, mo / L.m}}, k, n_max);
  }
  return scattering_coefficients(assemble_hat_medium(L, object), k, n_max, opt);
}

// ---------------------------------------------------------------------------
// Field reconstruction (mode-sum synthesis).
// ---------------------------------------------------------------------------

class LayeredSolve {
 public:
  LayeredSolve(const LayeredMedium& medium, double k, int n_max, SolverOptions opt = {})
      : solver_(medium, k, opt), n_max_(n_max) {
    spectrum_.k = k;
    spectrum_.n_max = n_max;
    spectrum_.te.resize(n_max);
    spectrum_.tm.resize(n_max);
    records_.reserve(2 * n_max);
    for (int n = 1; n <= n_max; ++n) {
      for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
        records_.push_back(solver_.solve({n, pol}));
        const ModeSolveRecord& rec = records_.back();
        (pol == Polarization::TE ? spectrum_.te[n - 1] : spectrum_.tm[n - 1]) = rec.s;
        if (rec.resonant) spectrum_.resonances.push_back(rec.mode);
      }
    }
  }

  const ScatteringSpectrum& spectrum() const { return spectrum_; }
  const LayeredModeSolver& solver() const { return solver_; }
  int n_max() const { return n_max_; }

  const ModeSolveRecord& record(ModeIndex m) const {
    return records_[2 * (m.n - 1) + (m.pol == Polarization::TE ? 0 : 1)];
  }

  // Total field (incident + scattered / interior) at x for the given
  // incident expansion.  Off-interface points only.
  void fields(const MultipoleCoefficients& inc, const Vec3& x, CVec3* E, CVec3* H) const {
    const double r = x.norm();
    const double k = solver_.k();
    const int nm = std::min(n_max_, inc.n_max());
    CVec3 accE = CVec3::Zero(), accH = CVec3::Zero();
    const VshEvaluator vsh(nm, x.normalized());
    const bool exterior = r >= solver_.medium().outer_boundary();
    const MaterialSample mat = exterior ? MaterialSample{1, 1, 1, 1} : solver_.medium().sample(r);

    for (int n = 1; n <= nm; ++n) {
      const double lam = std::sqrt(n * (n + 1.0));
      for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
        const ModeSolveRecord& rec = record({n, pol});
        const State2 uv = solver_.eval(rec, r);
        // radial parts from the tangential amplitudes
        cplx eP = 0, hP = 0;
        if (pol == Polarization::TE)
          hP = -lam * uv.u / (cplx(0, 1) * k * r * mat.mu_r);
        else
          eP = lam * uv.v / (cplx(0, 1) * k * r * mat.eps_r);
        for (int m = -n; m <= n; ++m) {
          const cplx a = inc.at(n, m, pol);
          if (a == cplx(0)) continue;
          const CVec3 P = vsh.P(n, m), B = vsh.B(n, m), C = vsh.C(n, m);
          if (pol == Polarization::TE) {
            accE += a * uv.u * C;
            accH += a * (hP * P + uv.v * B);
          } else {
            accE += a * (eP * P + uv.u * B);
            accH += a * uv.v * C;
          }
        }
      }
    }
    if (E) *E = accE;
    if (H) *H = accH;
  }

  // The returned pair references this solve, which must outlive it.
  FieldPair field_pair(const MultipoleCoefficients& inc) const {
    return {[this, inc](const Vec3& x) {
              CVec3 E;
              fields(inc, x, &E, nullptr);
              return E;
            },
            [this, inc](const Vec3& x) {
              CVec3 H;
              fields(inc, x, nullptr, &H);
              return H;
            },
            solver_.k()};
  }

 private:
  LayeredModeSolver solver_;
  int n_max_;
  ScatteringSpectrum spectrum_;
  std::vector<ModeSolveRecord> records_;
};

inline void reconstruct_fields(const LayeredSolve& solve, const MultipoleCoefficients& incident,
                               const Vec3& x, CVec3* E, CVec3* H) {
  solve.fields(incident, x, E, H);
}

// ---------------------------------------------------------------------------
// Discrete H(curl)-type energy norm on a radial interval.
// ---------------------------------------------------------------------------

namespace detail {

// d/dr of the squared-field and squared-curl integrands (times r^2) for one
// mode with tangential amplitudes (u, v) at radius r.
inline void energy_densities(const MaterialSample& m, double k, int n, Polarization pol,
                             const State2& uv, double r, double* fields2, double* curls2) {
  const double lam = n * (n + 1.0);
  const double u2 = std::norm(uv.u), v2 = std::norm(uv.v);
  double radial2;  // |radial component of the curl-carrying field|^2
  if (pol == Polarization::TE) {
    const double hp2 = lam * u2 / (k * k * r * r * std::norm(m.mu_r));
    *fields2 = (u2 + v2 + hp2) * r * r;
    radial2 = lam * u2 / (r * r);  // |mu_r h_P|^2 k^2
    *curls2 = (radial2 + k * k * std::norm(m.mu_t) * v2 + k * k * std::norm(m.eps_t) * u2) * r * r;
  } else {
    const double ep2 = lam * v2 / (k * k * r * r * std::norm(m.eps_r));
    *fields2 = (u2 + v2 + ep2) * r * r;
    radial2 = lam * v2 / (r * r);
    *curls2 = (radial2 + k * k * std::norm(m.eps_t) * u2 + k * k * std::norm(m.mu_t) * v2) * r * r;
  }
}

}  // namespace detail

// sqrt of sum over modes, weighted by the incident band weights, of
// int_ra^rb (|E|^2 + |curl E|^2 + |H|^2 + |curl H|^2) r^2 dr for the solved
// per-mode fields.  Endpoints must lie off interfaces.
inline double energy_norm(const LayeredSolve& solve, const MultipoleCoefficients& inc, double ra,
                          double rb, int exterior_quad_per_wavelength = 16) {
  if (!(ra < rb)) throw std::invalid_argument("energy_norm: need ra < rb");
  const LayeredModeSolver& solver = solve.solver();
  const LayeredMedium& med = solver.medium();
  const double k = solver.k();
  const double Rb = med.outer_boundary();
  const int nm = std::min(solve.n_max(), inc.n_max());
  // Ball probes (ra = 0) start just off the coordinate singularity; the
  // omitted core carries O((ra/b0)^{2n+3}) of each mode's energy.
  ra = std::max(ra, 1e-3 * med.boundaries().front());

  // segment list split by material interfaces
  std::vector<std::pair<double, double>> segments;
  {
    std::vector<double> cuts{ra};
    for (double b : med.boundaries())
      if (b > ra && b < rb) cuts.push_back(b);
    cuts.push_back(rb);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) segments.push_back({cuts[i], cuts[i + 1]});
  }

  double total = 0.0;
  for (int n = 1; n <= nm; ++n) {
    for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
      const double w = inc.mode_weight(n, pol);
      if (w == 0.0) continue;
      const ModeSolveRecord& rec = solve.record({n, pol});
      double mode_energy = 0.0;
      for (const auto& [s0, s1] : segments) {
        if (s0 >= Rb) {
          // exterior: closed-form radial solution, Gauss-Legendre panels
          const int npts = std::max(24, static_cast<int>(exterior_quad_per_wavelength * k *
                                                         (s1 - s0) / (2.0 * pi)) +
                                            8);
          const QuadratureRule1D gl = gauss_legendre(npts);
          for (int q = 0; q < npts; ++q) {
            const double r = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gl.nodes[q];
            const double wq = 0.5 * (s1 - s0) * gl.weights[q];
            const State2 uv = solver.eval(rec, r);
            double f2, c2;
            detail::energy_densities({1, 1, 1, 1}, k, n, pol, uv, r, &f2, &c2);
            mode_energy += wq * (f2 + c2);
          }
        } else {
          // interior: augment the radial ODE with the two accumulators
          const std::size_t shell = med.shell_index(0.5 * (s0 + s1));
          const RadialOdeCoeffs coeffs = solver.shell_coeffs(shell, {n, pol});
          const State2 at0 = solver.eval(rec, s0);
          std::array<cplx, 4> y{at0.u, at0.v, 0.0, 0.0};
          auto [eps, mu] = med.shell_tensors(shell);
          auto rhs = [&](double r, const std::array<cplx, 4>& s, std::array<cplx, 4>& d) {
            State2 in{s[0], s[1]}, out;
            coeffs.apply(r, in, out);
            d[0] = out.u;
            d[1] = out.v;
            MaterialSample ms{eps.radial(r), eps.tangential(r), mu.radial(r), mu.tangential(r)};
            double f2, c2;
            detail::energy_densities(ms, k, n, pol, in, r, &f2, &c2);
            d[2] = f2;
            d[3] = c2;
          };
          y = integrate_ode<4>(rhs, s0, s1, y, std::max(1e-10, solver.options().rtol));
          mode_energy += y[2].real() + y[3].real();
        }
      }
      total += w * mode_energy;
    }
  }
  return std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Cauchy continuation through the matching annulus.
// ---------------------------------------------------------------------------

struct CauchyContinuation {
  std::vector<std::pair<double, State2>> trajectory;  // from r_outer inward
  double hcurl_norm = 0.0;
};

// Integrates the annulus mode system from r_outer inward to r_inner with the
// given Cauchy data and returns the trajectory and its H(curl)-type norm.
inline CauchyContinuation cauchy_shell_continuation(const State2& data_at_outer,
                                                    const RadialTensor& eps,
                                                    const RadialTensor& mu, double k,
                                                    ModeIndex mode, double r_outer, double r_inner,
                                                    double tol = 1e-10, int samples = 33) {
  if (!(r_inner < r_outer))
    throw std::invalid_argument("cauchy_shell_continuation: need r_inner < r_outer");
  const RadialOdeCoeffs coeffs = radial_ode_coeffs(eps, mu, k, mode);
  CauchyContinuation out;
  out.trajectory.reserve(samples);
  std::array<cplx, 4> y{data_at_outer.u, data_at_outer.v, 0.0, 0.0};
  auto rhs = [&](double r, const std::array<cplx, 4>& s, std::array<cplx, 4>& d) {
    State2 in{s[0], s[1]}, dv;
    coeffs.apply(r, in, dv);
    d[0] = dv.u;
    d[1] = dv.v;
    MaterialSample ms{eps.radial(r), eps.tangential(r), mu.radial(r), mu.tangential(r)};
    double f2, c2;
    detail::energy_densities(ms, k, mode.n, mode.pol, in, r, &f2, &c2);
    d[2] = f2;
    d[3] = c2;
  };
  out.trajectory.push_back({r_outer, data_at_outer});
  for (int i = 1; i < samples; ++i) {
    const double r0 = r_outer + (r_inner - r_outer) * (i - 1.0) / (samples - 1.0);
    const double r1 = r_outer + (r_inner - r_outer) * static_cast<double>(i) / (samples - 1.0);
    y = integrate_ode<4>(rhs, r0, r1, y, tol);
    out.trajectory.push_back({r1, State2{y[0], y[1]}});
  }
  out.hcurl_norm = std::sqrt(std::abs(y[2].real()) + std::abs(y[3].real()));
  return out;
}

// ---------------------------------------------------------------------------
// Limit-field assembly by reflections.
// ---------------------------------------------------------------------------

// Piecewise delta -> 0 limit field built from the magnified-object solution:
// unchanged outside B_{r2}, pulled back once in the shell, twice in the core.

enum class LimitRegion { core, shell, exterior };

// Single branch of the assembly, evaluable up to (and on) its interfaces.
inline void limit_solution_branch(const FieldPair& hat, const RadialMap& F, const RadialMap& G,
                                  const Vec3& x, LimitRegion region, CVec3* E, CVec3* H) {
  switch (region) {
    case LimitRegion::exterior:
      if (E) *E = hat.E(x);
      if (H) *H = hat.H(x);
      return;
    case LimitRegion::shell: {
      const Vec3 xp = F(x);
      const CMat3 Jt = F.jacobian(x).transpose().cast<cplx>();
      if (E) *E = Jt * hat.E(xp);
      if (H) *H = Jt * hat.H(xp);
      return;
    }
    case LimitRegion::core: {
      const Vec3 xm = F(x);
      const Vec3 xp = G(xm);
      const CMat3 Jt = (G.jacobian(xm) * F.jacobian(x)).transpose().cast<cplx>();
      if (E) *E = Jt * hat.E(xp);
      if (H) *H = Jt * hat.H(xp);
      return;
    }
  }
}

inline void limit_solution_via_reflection(const FieldPair& hat, const RadialMap& F,
                                          const RadialMap& G, const Vec3& x, CVec3* E, CVec3* H,
                                          double interface_tol = 1e-9) {
  const double r2 = F.reference_radius();
  const double r3 = G.reference_radius();
  const double r1 = F.inverse_eval(Vec3(0, 0, r3)).norm();
  const double r = x.norm();
  for (const double ri : {r1, r2, r3})
    if (std::abs(r - ri) < interface_tol * ri)
      throw std::domain_error("limit_solution_via_reflection: point on an interface");

  const LimitRegion region = r > r2 ? LimitRegion::exterior
                             : r > r1 ? LimitRegion::shell
                                      : LimitRegion::core;
  limit_solution_branch(hat, F, G, x, region, E, H);
}

}  // namespace cmlens
