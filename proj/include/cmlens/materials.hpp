#pragma once

// Material tensor calculus: push-forwards of tensors and vector densities
// under the radial maps, the closed-form lens tensor, lens / magnified-object
// medium assembly, and the reflecting-complementarity checker.

#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmlens/common.hpp"
#include "cmlens/geometry.hpp"

namespace cmlens {

// ---------------------------------------------------------------------------
// Radial scalar profiles and spherically anisotropic tensors.
// ---------------------------------------------------------------------------

// Finite sum of power terms  sum_i c_i r^{p_i}.  Covers constants, the
// power-law lens entries, and the lossy shell (power law + i delta).
struct RadialProfile {
  struct Term {
    cplx coeff;
    double power;
  };
  std::vector<Term> terms;

  RadialProfile() = default;
  RadialProfile(cplx constant) : terms{{constant, 0.0}} {}  // NOLINT(google-explicit-constructor)
  static RadialProfile power_law(cplx coeff, double power) { return RadialProfile{{{coeff, power}}}; }

  cplx operator()(double r) const {
    cplx v = 0.0;
    for (const auto& t : terms) v += t.coeff * (t.power == 0.0 ? 1.0 : std::pow(r, t.power));
    return v;
  }

  RadialProfile operator+(const RadialProfile& o) const {
    RadialProfile s = *this;
    s.terms.insert(s.terms.end(), o.terms.begin(), o.terms.end());
    return s;
  }

  // Profile of r -> f(r/c)/c  (the magnified-object rescaling).
  RadialProfile rescaled(double c) const {
    RadialProfile s;
    for (const auto& t : terms) s.terms.push_back({t.coeff / std::pow(c, 1.0 + t.power), t.power});
    return s;
  }

  bool is_constant() const {
    for (const auto& t : terms)
      if (t.power != 0.0) return false;
    return true;
  }

 private:
  explicit RadialProfile(std::vector<Term> t) : terms(std::move(t)) {}
};

// Symmetric tensor a_r(r) e_r x e_r + a_t(r) (e_th x e_th + e_ph x e_ph).
struct RadialTensor {
  RadialProfile radial;
  RadialProfile tangential;

  static RadialTensor isotropic(cplx c) { return {RadialProfile(c), RadialProfile(c)}; }

  CMat3 matrix_at(const Vec3& x) const {
    const double r = x.norm();
    return radial_anisotropic_matrix(x, radial(r), tangential(r));
  }
  RadialTensor operator+(const RadialProfile& iso) const {
    return {radial + iso, tangential + iso};
  }
  bool is_isotropic_constant() const {
    if (!radial.is_constant() || !tangential.is_constant()) return false;
    return std::abs(radial(1.0) - tangential(1.0)) == 0.0;
  }
};

// General matrix-valued field, used by the checkers and the finite-difference
// oracles; the solver itself consumes only the spherical form above.
struct TensorField {
  std::function<CMat3(const Vec3&)> eval;
  CMat3 operator()(const Vec3& x) const { return eval(x); }
};

inline TensorField constant_tensor_field(const CMat3& a) {
  return {[a](const Vec3&) { return a; }};
}
inline TensorField identity_tensor_field() { return constant_tensor_field(CMat3::Identity()); }
inline TensorField radial_tensor_field(const RadialTensor& t) {
  return {[t](const Vec3& x) { return t.matrix_at(x); }};
}

// ---------------------------------------------------------------------------
// Push-forwards (change-of-variables transport).
//
//   T_* a (x') = grad T a grad T^T / det grad T,   x = T^{-1}(x')
//   T_* j (x') = grad T j / det grad T
//
// The signed determinant is used throughout.
// ---------------------------------------------------------------------------

template <class Map, class MatrixFn>
CMat3 push_forward_tensor_fn(const Map& T, const MatrixFn& a, const Vec3& xp) {
  const Vec3 x = T.inverse_eval(xp);
  const Mat3 J = T.jacobian(x);
  const double det = J.determinant();
  if (det == 0.0) throw std::domain_error("push_forward_tensor: singular Jacobian");
  const CMat3 Jc = J.cast<cplx>();
  const CMat3 m = (Jc * a(x) * Jc.transpose()) / det;
  return 0.5 * (m + m.transpose());  // symmetry of symmetric arguments is exact
}

template <class Map>
CMat3 push_forward_tensor(const Map& T, const TensorField& a, const Vec3& xp) {
  return push_forward_tensor_fn(T, a.eval, xp);
}

template <class Map, class VectorFn>
CVec3 push_forward_vector(const Map& T, const VectorFn& j, const Vec3& xp) {
  const Vec3 x = T.inverse_eval(xp);
  const Mat3 J = T.jacobian(x);
  const double det = J.determinant();
  if (det == 0.0) throw std::domain_error("push_forward_vector: singular Jacobian");
  return (J.cast<cplx>() * j(x)) / det;
}

// Closed form of the lens-shell tensor (F^{-1} push-forward of the identity):
//   radial     = -(r2^a / r^a) / (a - 1)
//   tangential = -(r2^a / r^a) (a - 1)
inline std::pair<double, double> lens_tensor_closed_form(double alpha, double r2, double r) {
  if (!(alpha > 1.0)) throw std::domain_error("lens_tensor_closed_form: alpha must be > 1");
  if (!(r > 0.0) || r > r2 * (1.0 + 1e-12))
    throw std::domain_error("lens_tensor_closed_form: r outside the lens shell");
  const double pref = -std::pow(r2 / r, alpha);
  return {pref / (alpha - 1.0), pref * (alpha - 1.0)};
}

inline RadialTensor lens_shell_tensor(double alpha, double r2) {
  const double c = -std::pow(r2, alpha);
  return {RadialProfile::power_law(c / (alpha - 1.0), -alpha),
          RadialProfile::power_law(c * (alpha - 1.0), -alpha)};
}

// ---------------------------------------------------------------------------
// Layered media.
// ---------------------------------------------------------------------------

struct MaterialSample {
  cplx eps_r, eps_t, mu_r, mu_t;
};

// Concentric shells with per-shell (eps, mu) radial tensors.  The loss
// +i delta I applies to the shells flagged lossy (the sign-changing lens
// layer); everything outside the last boundary is vacuum.
class LayeredMedium {
 public:
  struct Shell {
    RadialTensor eps, mu;
    bool lossy = false;
  };

  LayeredMedium(std::vector<double> boundaries, std::vector<Shell> shells, double delta = 0.0)
      : boundaries_(std::move(boundaries)), shells_(std::move(shells)), delta_(delta) {
    if (shells_.size() != boundaries_.size())
      throw std::invalid_argument("LayeredMedium: need one shell per boundary");
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      if (boundaries_[i] <= 0.0 || (i > 0 && boundaries_[i] <= boundaries_[i - 1]))
        throw std::invalid_argument("LayeredMedium: boundaries must be positive increasing");
    }
    if (delta_ < 0.0) throw std::invalid_argument("LayeredMedium: delta must be >= 0");
    shells_.push_back({RadialTensor::isotropic(1.0), RadialTensor::isotropic(1.0), false});
  }

  const std::vector<double>& boundaries() const { return boundaries_; }
  std::size_t shell_count() const { return shells_.size(); }  // includes exterior vacuum
  double delta() const { return delta_; }
  double outer_boundary() const { return boundaries_.empty() ? 0.0 : boundaries_.back(); }

  LayeredMedium with_delta(double d) const {
    LayeredMedium m = *this;
    if (d < 0.0) throw std::invalid_argument("LayeredMedium: delta must be >= 0");
    m.delta_ = d;
    return m;
  }

  std::size_t shell_index(double r) const {
    for (std::size_t i = 0; i < boundaries_.size(); ++i)
      if (r < boundaries_[i]) return i;
    return shells_.size() - 1;
  }
  double shell_inner(std::size_t i) const { return i == 0 ? 0.0 : boundaries_[i - 1]; }
  double shell_outer(std::size_t i) const {
    return i < boundaries_.size() ? boundaries_[i] : std::numeric_limits<double>::infinity();
  }

  // Shell tensors with the +i delta I loss applied where flagged.
  std::pair<RadialTensor, RadialTensor> shell_tensors(std::size_t i) const {
    const Shell& s = shells_.at(i);
    if (s.lossy && delta_ > 0.0) {
      const RadialProfile loss(cplx(0.0, delta_));
      return {s.eps + loss, s.mu + loss};
    }
    return {s.eps, s.mu};
  }
  const Shell& raw_shell(std::size_t i) const { return shells_.at(i); }

  MaterialSample sample(double r) const {
    const auto [eps, mu] = shell_tensors(shell_index(r));
    return {eps.radial(r), eps.tangential(r), mu.radial(r), mu.tangential(r)};
  }

  bool shell_is_isotropic_constant(std::size_t i) const {
    const Shell& s = shells_.at(i);
    return !(s.lossy && delta_ > 0.0) && s.eps.is_isotropic_constant() &&
           s.mu.is_isotropic_constant();
  }

  bool has_sign_changing_shell() const {
    for (std::size_t i = 0; i < shells_.size(); ++i) {
      const double rin = shell_inner(i);
      const double rout = std::min(shell_outer(i), rin > 0 ? 2 * rin : 1.0);
      const double rmid = (rin + rout) / 2;
      const Shell& s = shells_[i];
      if (s.eps.radial(rmid).real() < 0.0 || s.eps.tangential(rmid).real() < 0.0 ||
          s.mu.radial(rmid).real() < 0.0 || s.mu.tangential(rmid).real() < 0.0)
        return true;
    }
    return false;
  }

  TensorField eps_field() const {
    LayeredMedium self = *this;
    return {[self](const Vec3& x) {
      const auto [eps, mu] = self.shell_tensors(self.shell_index(x.norm()));
      (void)mu;
      return eps.matrix_at(x);
    }};
  }
  TensorField mu_field() const {
    LayeredMedium self = *this;
    return {[self](const Vec3& x) {
      const auto [eps, mu] = self.shell_tensors(self.shell_index(x.norm()));
      (void)eps;
      return mu.matrix_at(x);
    }};
  }

 private:
  std::vector<double> boundaries_;
  std::vector<Shell> shells_;
  double delta_;
};

// True iff every eigenvalue of the real (symmetrized) part lies in
// [1/Lambda, Lambda] at each sample point.
inline bool check_ellipticity(const TensorField& t, const std::vector<Vec3>& samples,
                              double Lambda) {
  if (!(Lambda >= 1.0)) throw std::invalid_argument("check_ellipticity: Lambda must be >= 1");
  for (const Vec3& x : samples) {
    const CMat3 a = t(x);
    const Mat3 re = 0.5 * (a.real() + a.real().transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> es(re);
    if (es.eigenvalues().minCoeff() < 1.0 / Lambda - 1e-12 ||
        es.eigenvalues().maxCoeff() > Lambda + 1e-12)
      return false;
  }
  return true;
}

// Object medium on the core ball, given as spherical tensors.
struct ObjectMedium {
  RadialTensor eps, mu;
};

namespace detail {

inline void require_elliptic_object(const ObjectMedium& obj, double r0) {
  std::vector<Vec3> pts;
  for (int i = 1; i <= 8; ++i) pts.emplace_back(0.0, 0.0, r0 * i / 8.0);
  const double Lambda = 1e6;
  if (!check_ellipticity(radial_tensor_field(obj.eps), pts, Lambda) ||
      !check_ellipticity(radial_tensor_field(obj.mu), pts, Lambda))
    throw std::domain_error("object medium is not uniformly elliptic on the core ball");
  for (const Vec3& x : pts) {
    const double r = x.norm();
    for (const cplx v : {obj.eps.radial(r), obj.eps.tangential(r), obj.mu.radial(r),
                         obj.mu.tangential(r)})
      if (v.imag() < -1e-14) throw std::domain_error("object medium violates passivity");
  }
}

}  // namespace detail

// Four shells: object | (mI, mI) | lens shell (+i delta I) | vacuum.
inline LayeredMedium assemble_lens_medium(const LensRadii& L, double delta,
                                          const ObjectMedium& object) {
  detail::require_elliptic_object(object, L.r0);
  const RadialTensor match = RadialTensor::isotropic(L.m);
  const RadialTensor lens = lens_shell_tensor(L.alpha, L.r2);
  std::vector<LayeredMedium::Shell> shells = {
      {object.eps, object.mu, false},
      {match, match, false},
      {lens, lens, true},
  };
  return LayeredMedium({L.r0, L.r1, L.r2}, std::move(shells), delta);
}

// Two shells: the m-times magnified object in B_{m r0} | vacuum.
inline LayeredMedium assemble_hat_medium(const LensRadii& L, const ObjectMedium& object) {
  detail::require_elliptic_object(object, L.r0);
  const RadialTensor eps{object.eps.radial.rescaled(L.m), object.eps.tangential.rescaled(L.m)};
  const RadialTensor mu{object.mu.radial.rescaled(L.m), object.mu.tangential.rescaled(L.m)};
  return LayeredMedium({L.m * L.r0}, {{eps, mu, false}}, 0.0);
}

// ---------------------------------------------------------------------------
// Reflecting-complementarity checker.
// ---------------------------------------------------------------------------

enum class ComplementarityCondition { none, shell_pushforward, boundary_fixed, hat_medium };

inline const char* to_string(ComplementarityCondition c) {
  switch (c) {
    case ComplementarityCondition::none: return "none";
    case ComplementarityCondition::shell_pushforward: return "shell_pushforward";
    case ComplementarityCondition::boundary_fixed: return "boundary_fixed";
    case ComplementarityCondition::hat_medium: return "hat_medium";
  }
  return "?";
}

struct ComplementarityReport {
  bool pass = true;
  double max_violation = 0.0;
  ComplementarityCondition failed_condition = ComplementarityCondition::none;
};

// Samples the three defining identities of the reflecting-complementary pair:
//  (i)   F_* eps = eps and F_* mu = mu in the image annulus r2 < |x| < r3,
//  (ii)  F fixes the sphere |x| = r2 and G fixes |x| = r3 pointwise,
//  (iii) (G o F)_* of the media inside B_{r1} matches the magnified-object
//        medium: identity past the scaled core, the rescaled object inside.
// Violations are reported, never thrown.  The loss is ignored: the property
// concerns the lossless pair, so pass the delta = 0 assembly.
inline ComplementarityReport check_reflecting_complementary(const LayeredMedium& medium,
                                                            const RadialMap& F,
                                                            const RadialMap& G,
                                                            int samples = 200,
                                                            double tol = 1e-12) {
  ComplementarityReport rep;
  const double r2 = F.reference_radius();
  const double r3 = G.reference_radius();
  const double r1 = F.inverse_eval(Vec3(0, 0, r3)).norm();
  const double r0 = medium.boundaries().empty() ? 0.0 : medium.boundaries().front();

  std::mt19937 rng(0xc0ffee);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto rand_dir = [&]() {
    Vec3 v;
    do {
      v = Vec3(unit(rng), unit(rng), unit(rng));
    } while (v.norm() < 1e-2 || v.norm() > 1.0);
    return Vec3(v.normalized());
  };

  const TensorField eps = medium.eps_field();
  const TensorField mu = medium.mu_field();
  auto fail_if = [&](ComplementarityCondition cond, double viol, double tolerance) {
    if (viol > rep.max_violation) rep.max_violation = viol;
    if (viol > tolerance && rep.pass) {
      rep.pass = false;
      rep.failed_condition = cond;
    }
  };

  // (ii) fixed spheres
  for (int i = 0; i < samples; ++i) {
    const Vec3 d = rand_dir();
    fail_if(ComplementarityCondition::boundary_fixed, (F(r2 * d) - r2 * d).norm() / r2, tol);
    fail_if(ComplementarityCondition::boundary_fixed, (G(r3 * d) - r3 * d).norm() / r3, tol);
  }

  // (i) F_* of the shell medium reproduces the medium on the image annulus
  std::uniform_real_distribution<double> t01(0.02, 0.98);
  for (int i = 0; i < samples; ++i) {
    const double rp = r2 + t01(rng) * (r3 - r2);
    const Vec3 xp = rp * rand_dir();
    const CMat3 pf_eps = push_forward_tensor(F, eps, xp);
    const CMat3 pf_mu = push_forward_tensor(F, mu, xp);
    const double v = std::max((pf_eps - eps(xp)).norm() / std::max(1.0, eps(xp).norm()),
                              (pf_mu - mu(xp)).norm() / std::max(1.0, mu(xp).norm()));
    fail_if(ComplementarityCondition::shell_pushforward, v, tol);
  }

  // (iii) (G o F)_* of the inner media equals the magnified-object medium
  const auto GF = compose(G, F);
  const double c = GF(Vec3(0, 0, 0.5 * r1)).norm() / (0.5 * r1);  // dilation factor
  const auto& core = medium.raw_shell(0);
  auto hat_eps = [&](const Vec3& xp) -> CMat3 {
    const double r = xp.norm();
    if (r > c * r0) return CMat3::Identity();
    return radial_anisotropic_matrix(xp, core.eps.radial(r / c) / c,
                                     core.eps.tangential(r / c) / c);
  };
  auto hat_mu = [&](const Vec3& xp) -> CMat3 {
    const double r = xp.norm();
    if (r > c * r0) return CMat3::Identity();
    return radial_anisotropic_matrix(xp, core.mu.radial(r / c) / c,
                                     core.mu.tangential(r / c) / c);
  };
  for (int i = 0; i < samples; ++i) {
    const double r = (0.05 + 0.9 * t01(rng)) * r1;
    const Vec3 x = r * rand_dir();
    const Vec3 xp = GF(x);
    const CMat3 pf_eps = push_forward_tensor_fn(GF, eps.eval, xp);
    const CMat3 pf_mu = push_forward_tensor_fn(GF, mu.eval, xp);
    const double v =
        std::max((pf_eps - hat_eps(xp)).norm() / std::max(1.0, hat_eps(xp).norm()),
                 (pf_mu - hat_mu(xp)).norm() / std::max(1.0, hat_mu(xp).norm()));
    fail_if(ComplementarityCondition::hat_medium, v, tol);
  }

  return rep;
}

}  // namespace cmlens
