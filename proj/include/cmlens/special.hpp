#pragma once

// Special functions used by the mode solver and the multipole calculus:
// spherical Bessel functions of complex argument, Riccati-Bessel pairs,
// Gauss-Legendre nodes, and orthonormal associated Legendre tables with
// the pole-safe tangential derivatives.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "cmlens/common.hpp"

namespace cmlens {

// ---------------------------------------------------------------------------
// Spherical Bessel functions j_n, y_n for complex argument.
//
// j_n: Miller downward recurrence normalized by j_0 = sin(z)/z, with a power
// series fallback for small |z|.  y_n: stable upward recurrence.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<cplx> sph_j_series(int nmax, cplx z) {
  // j_n(z) = z^n/(2n+1)!! * sum_k (-z^2/2)^k / (k! (2n+2k+1)!!)
  std::vector<cplx> j(nmax + 1);
  const cplx z2 = -0.5 * z * z;
  double dfac = 1.0;  // (2n+1)!!
  cplx zn = 1.0;      // z^n
  for (int n = 0; n <= nmax; ++n) {
    if (n > 0) {
      dfac *= 2 * n + 1;
      zn *= z;
    }
    cplx term = 1.0, sum = 1.0;
    for (int k = 1; k <= 60; ++k) {
      term *= z2 / (static_cast<double>(k) * (2.0 * n + 2.0 * k + 1.0));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    j[n] = zn / dfac * sum;
  }
  return j;
}

}  // namespace detail

// j_0..j_nmax at z.
inline std::vector<cplx> sph_j_all(int nmax, cplx z) {
  if (nmax < 0) throw std::invalid_argument("sph_j_all: nmax < 0");
  const double az = std::abs(z);
  if (az < 0.5) return detail::sph_j_series(nmax, z);

  const int nstart = nmax + 16 + static_cast<int>(std::ceil(1.3 * az));
  cplx fp = 0.0, f = 1e-280;
  std::vector<cplx> j(nmax + 1);
  for (int n = nstart; n >= 1; --n) {
    const cplx fm = (2.0 * n + 1.0) / z * f - fp;
    fp = f;
    f = fm;
    if (n - 1 <= nmax) j[n - 1] = f;
    if (std::abs(f) > 1e250) {  // renormalize to dodge overflow
      const double s = 1e-250;
      f *= s;
      fp *= s;
      for (int i = n - 1; i <= nmax; ++i)
        if (i >= 0) j[i] *= s;
    }
  }
  const cplx j0 = std::sin(z) / z;
  const cplx scale = j0 / j[0];
  for (auto& v : j) v *= scale;
  return j;
}

// y_0..y_nmax at z.
inline std::vector<cplx> sph_y_all(int rmax, cplx z) {
  if (std::abs(z) == 0.0) throw std::domain_error("sph_y_all: z = 0");
  std::vector<cplx> y(rmax + 1);
  const cplx cz = std::cos(z), sz = std::sin(z);
  y[0] = -cz / z;
  if (rmax >= 1) y[1] = -cz / (z * z) - sz / z;
  for (int n = 2; n <= rmax; ++n) y[n] = (2.0 * n - 1.0) / z * y[n - 1] - y[n - 2];
  return y;
}

inline cplx sph_j(int n, cplx z) { return sph_j_all(n, z)[n]; }
inline cplx sph_y(int n, cplx z) { return sph_y_all(n, z)[n]; }

// Riccati-Bessel value/derivative pairs.
//   psi_n(z) = z j_n(z),  chi_n(z) = z y_n(z),  xi_n(z) = z h1_n(z).
// Derivative via (z f_n)' = z f_{n-1} - n f_n (same for j, y, h1).
struct Riccati {
  cplx value;
  cplx deriv;
};

inline Riccati riccati_psi(int n, cplx z) {
  auto j = sph_j_all(n, z);
  const cplx jm1 = (n == 0) ? std::cos(z) / z : j[n - 1];
  return {z * j[n], z * jm1 - static_cast<double>(n) * j[n]};
}

inline Riccati riccati_chi(int n, cplx z) {
  auto y = sph_y_all(n, z);
  const cplx ym1 = (n == 0) ? std::sin(z) / z : y[n - 1];
  return {z * y[n], z * ym1 - static_cast<double>(n) * y[n]};
}

inline Riccati riccati_xi(int n, cplx z) {
  const Riccati p = riccati_psi(n, z), c = riccati_chi(n, z);
  return {p.value + cplx(0, 1) * c.value, p.deriv + cplx(0, 1) * c.deriv};
}

inline cplx sph_h1(int n, cplx z) { return sph_j(n, z) + cplx(0, 1) * sph_y(n, z); }

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [-1, 1] (Newton iteration on P_n).
// ---------------------------------------------------------------------------

struct QuadratureRule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule1D gauss_legendre(int npts) {
  if (npts < 1) throw std::invalid_argument("gauss_legendre: npts < 1");
  QuadratureRule1D q;
  q.nodes.resize(npts);
  q.weights.resize(npts);
  const int half = (npts + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(pi * (i + 0.75) / (npts + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int n = 2; n <= npts; ++n) {
        const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
        p0 = p1;
        p1 = p2;
      }
      dp = npts * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.weights[i] = w;
    q.nodes[npts - 1 - i] = x;
    q.weights[npts - 1 - i] = w;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Orthonormal associated Legendre tables at a single angle.
//
// p(n,m)   : normalized P~_n^m(cos t), with Y_nm = P~_n^m e^{i m phi} and
//            int_{S^2} |Y_nm|^2 = 1 (Condon-Shortley phase included).
// pi_m(n,m): m P~_n^m / sin t   (finite at the poles)
// tau(n,m) : d P~_n^m / d t     (finite at the poles)
//
// The pi/tau pair is computed through Q~ = P~/sin t with its own recurrence,
// so no explicit division by sin t occurs.
// ---------------------------------------------------------------------------

class LegendreTable {
 public:
  LegendreTable(int nmax, double cos_theta) : nmax_(nmax) {
    if (nmax < 0) throw std::invalid_argument("LegendreTable: nmax < 0");
    const double x = cos_theta;
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    p_.assign(size_(), 0.0);
    q_.assign(size_(), 0.0);
    tau_.assign(size_(), 0.0);

    p_[idx_(0, 0)] = std::sqrt(1.0 / (4.0 * pi));
    if (nmax >= 1) {
      p_[idx_(1, 0)] = std::sqrt(3.0 / (4.0 * pi)) * x;
      q_[idx_(1, 1)] = -std::sqrt(3.0 / (8.0 * pi));
      p_[idx_(1, 1)] = q_[idx_(1, 1)] * s;
    }
    for (int m = 2; m <= nmax; ++m) {
      const double c = -std::sqrt((2.0 * m + 1.0) / (2.0 * m));
      q_[idx_(m, m)] = c * s * q_[idx_(m - 1, m - 1)];
      p_[idx_(m, m)] = q_[idx_(m, m)] * s;
    }
    for (int m = 0; m <= nmax; ++m) {
      if (m + 1 <= nmax) {
        const double c = std::sqrt(2.0 * m + 3.0);
        p_[idx_(m + 1, m)] = c * x * p_[idx_(m, m)];
        if (m >= 1) q_[idx_(m + 1, m)] = c * x * q_[idx_(m, m)];
      }
      for (int n = m + 2; n <= nmax; ++n) {
        const double a = anm_(n, m), ap = anm_(n - 1, m);
        p_[idx_(n, m)] = a * (x * p_[idx_(n - 1, m)] - p_[idx_(n - 2, m)] / ap);
        if (m >= 1) q_[idx_(n, m)] = a * (x * q_[idx_(n - 1, m)] - q_[idx_(n - 2, m)] / ap);
      }
    }
    // tau_n^m = n x Q~_n^m - sqrt((n^2-m^2)(2n+1)/(2n-1)) Q~_{n-1}^m   (m >= 1)
    // tau_n^0 = sqrt(n(n+1)) P~_n^1
    for (int n = 1; n <= nmax; ++n) {
      tau_[idx_(n, 0)] = std::sqrt(n * (n + 1.0)) * p_[idx_(n, 1)];
      for (int m = 1; m <= n; ++m) {
        double t = n * x * q_[idx_(n, m)];
        if (n - 1 >= m)
          t -= std::sqrt((static_cast<double>(n) * n - static_cast<double>(m) * m) *
                         (2.0 * n + 1.0) / (2.0 * n - 1.0)) *
               q_[idx_(n - 1, m)];
        tau_[idx_(n, m)] = t;
      }
    }
  }

  // m may be negative; Y_{n,-m} = (-1)^m conj(Y_{n,m}) is applied here.
  double p(int n, int m) const { return csphase_(m) * p_[idx_(n, std::abs(m))]; }
  double tau(int n, int m) const { return csphase_(m) * tau_[idx_(n, std::abs(m))]; }
  double pi_m(int n, int m) const {
    const int am = std::abs(m);
    const double v = am * q_[idx_(n, am)];
    return (m < 0 ? -1.0 : 1.0) * csphase_(m) * v;
  }

 private:
  static double csphase_(int m) { return (m < 0 && (m & 1)) ? -1.0 : 1.0; }
  static double anm_(int n, int m) {
    return std::sqrt((4.0 * n * n - 1.0) /
                     (static_cast<double>(n) * n - static_cast<double>(m) * m));
  }
  std::size_t idx_(int n, int m) const { return static_cast<std::size_t>(n) * (nmax_ + 1) + m; }
  std::size_t size_() const { return static_cast<std::size_t>(nmax_ + 1) * (nmax_ + 1); }
  int nmax_;
  std::vector<double> p_, q_, tau_;
};

}  // namespace cmlens
