#pragma once

// Experiment driver: delta sweeps against the magnified-object spectrum,
// log-log rate fitting, blow-up probes for detuned lenses, complementarity
// audits, and report emission.  The JSON config grammar is documented in the
// project README.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmlens/common.hpp"
#include "cmlens/fields.hpp"
#include "cmlens/geometry.hpp"
#include "cmlens/materials.hpp"
#include "cmlens/modesolver.hpp"
#include "cmlens/multipole.hpp"

namespace cmlens {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Experiment configuration.
// ---------------------------------------------------------------------------

struct DetuneSpec {
  double r2_factor = 1.0;                  // scales the lens-shell outer radius
  bool lens_shell_minus_identity = false;  // replace the lens shell by (-I, -I)
  bool any() const { return r2_factor != 1.0 || lens_shell_minus_identity; }
};

struct ExperimentConfig {
  double m = 2.0, r0 = 1.0, alpha = 2.0;
  ObjectMedium object{RadialTensor::isotropic(2.0), RadialTensor::isotropic(2.0)};
  double delta = 0.0;  // single-solve loss; sweeps use delta_grid
  double k = 1.0;
  SourceSpec source;
  std::vector<double> delta_grid{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int n_max = 0;  // 0: auto policy (incident tail below 1e-10, capped at 40)
  double probe_radius_factor = 1.5;
  double slope_window_lo = 0.4, slope_window_hi = 0.65;
  int checker_samples = 200;
  double checker_tol = 1e-12;
  DetuneSpec detune;
  std::string output_dir = "out";

  void validate() const {
    if (!(m > 1.0) || !(r0 > 0.0) || !(alpha > 1.0))
      throw std::invalid_argument("config: need m > 1, r0 > 0, alpha > 1");
    if (!(k > 0.0)) throw std::invalid_argument("config: need k > 0");
    if (delta < 0.0) throw std::invalid_argument("config: delta must be >= 0");
    if (delta_grid.empty()) throw std::invalid_argument("config: empty delta grid");
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
      if (!(delta_grid[i] > 0.0) || !(delta_grid[i] < 1.0))
        throw std::invalid_argument("config: delta grid values must lie in (0, 1)");
      if (i > 0 && !(delta_grid[i] < delta_grid[i - 1]))
        throw std::invalid_argument("config: delta grid must be strictly decreasing");
    }
    if (!(probe_radius_factor > 1.0))
      throw std::invalid_argument("config: probe radius must exceed r3");
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization.  Scalars: number = real constant; [re, im] =
// complex constant; {"coeff": c, "power": p} = c r^p; arrays of such objects
// sum.  All fields are always written (no hidden defaults).
// ---------------------------------------------------------------------------

namespace cfgio {

inline json dump_cplx(cplx v) {
  if (v.imag() == 0.0) return json(v.real());
  return json::array({v.real(), v.imag()});
}

inline cplx parse_cplx(const json& j) {
  if (j.is_number()) return cplx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2) return cplx(j[0].get<double>(), j[1].get<double>());
  throw std::invalid_argument("config: expected number or [re, im]");
}

inline json dump_profile(const RadialProfile& p) {
  if (p.terms.size() == 1 && p.terms[0].power == 0.0) return dump_cplx(p.terms[0].coeff);
  json arr = json::array();
  for (const auto& t : p.terms) arr.push_back({{"coeff", dump_cplx(t.coeff)}, {"power", t.power}});
  return arr.size() == 1 ? arr[0] : arr;
}

inline RadialProfile parse_profile(const json& j) {
  // forms: number | [re, im] | {"coeff": c, "power": p} | [term, ...]
  RadialProfile p;
  auto parse_term = [](const json& t) -> RadialProfile::Term {
    if (t.is_object()) return {parse_cplx(t.at("coeff")), t.at("power").get<double>()};
    return {parse_cplx(t), 0.0};
  };
  if (j.is_number() || j.is_object()) {
    p.terms.push_back(parse_term(j));
    return p;
  }
  if (j.is_array()) {
    if (j.size() == 2 && j[0].is_number() && j[1].is_number()) {
      p.terms.push_back(parse_term(j));
      return p;
    }
    for (const auto& t : j) p.terms.push_back(parse_term(t));
    return p;
  }
  throw std::invalid_argument("config: bad radial profile entry");
}

}  // namespace cfgio

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["lens"] = {{"m", c.m}, {"r0", c.r0}, {"alpha", c.alpha}};
  j["delta"] = c.delta;
  j["object"] = {{"eps_radial", cfgio::dump_profile(c.object.eps.radial)},
                 {"eps_tangential", cfgio::dump_profile(c.object.eps.tangential)},
                 {"mu_radial", cfgio::dump_profile(c.object.mu.radial)},
                 {"mu_tangential", cfgio::dump_profile(c.object.mu.tangential)}};
  j["k"] = c.k;
  json src;
  src["kind"] = c.source.kind == SourceSpec::Kind::plane_wave ? "plane_wave" : "electric_dipole";
  if (c.source.kind == SourceSpec::Kind::plane_wave) {
    src["direction"] = {c.source.direction.x(), c.source.direction.y(), c.source.direction.z()};
  } else {
    src["position"] = {c.source.position.x(), c.source.position.y(), c.source.position.z()};
  }
  src["moment"] = {cfgio::dump_cplx(c.source.moment[0]), cfgio::dump_cplx(c.source.moment[1]),
                   cfgio::dump_cplx(c.source.moment[2])};
  j["source"] = src;
  j["delta_grid"] = c.delta_grid;
  j["n_max"] = c.n_max;
  j["probe_radius_factor"] = c.probe_radius_factor;
  j["slope_window"] = {c.slope_window_lo, c.slope_window_hi};
  j["checker"] = {{"samples", c.checker_samples}, {"tol", c.checker_tol}};
  j["detune"] = {{"r2_factor", c.detune.r2_factor},
                 {"lens_shell_minus_identity", c.detune.lens_shell_minus_identity}};
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const json& lens = j.at("lens");
  c.m = lens.at("m").get<double>();
  c.r0 = lens.at("r0").get<double>();
  c.alpha = lens.at("alpha").get<double>();
  const json& obj = j.at("object");
  c.object.eps = {cfgio::parse_profile(obj.at("eps_radial")),
                  cfgio::parse_profile(obj.at("eps_tangential"))};
  c.object.mu = {cfgio::parse_profile(obj.at("mu_radial")),
                 cfgio::parse_profile(obj.at("mu_tangential"))};
  c.delta = j.value("delta", 0.0);
  c.k = j.at("k").get<double>();
  const json& src = j.at("source");
  const std::string kind = src.at("kind").get<std::string>();
  if (kind == "plane_wave") {
    c.source.kind = SourceSpec::Kind::plane_wave;
    const auto& d = src.at("direction");
    c.source.direction = Vec3(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
  } else if (kind == "electric_dipole") {
    c.source.kind = SourceSpec::Kind::electric_dipole;
    const auto& p = src.at("position");
    c.source.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  } else {
    throw std::invalid_argument("config: unknown source kind " + kind);
  }
  const auto& mom = src.at("moment");
  for (int i = 0; i < 3; ++i) c.source.moment[i] = cfgio::parse_cplx(mom[i]);
  c.delta_grid = j.at("delta_grid").get<std::vector<double>>();
  c.n_max = j.at("n_max").get<int>();
  c.probe_radius_factor = j.at("probe_radius_factor").get<double>();
  c.slope_window_lo = j.at("slope_window")[0].get<double>();
  c.slope_window_hi = j.at("slope_window")[1].get<double>();
  c.checker_samples = j.at("checker").at("samples").get<int>();
  c.checker_tol = j.at("checker").at("tol").get<double>();
  c.detune.r2_factor = j.at("detune").at("r2_factor").get<double>();
  c.detune.lens_shell_minus_identity =
      j.at("detune").at("lens_shell_minus_identity").get<bool>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Assembly helpers.
// ---------------------------------------------------------------------------

inline LensRadii config_lens(const ExperimentConfig& c) { return lens_radii(c.m, c.r0, c.alpha); }

// Lens medium per config, honoring the documented detuning.
inline LayeredMedium assemble_from_config(const ExperimentConfig& c, double delta) {
  const LensRadii L = config_lens(c);
  if (!c.detune.any()) return assemble_lens_medium(L, delta, c.object);
  const double r2d = c.detune.r2_factor * L.r2;
  if (r2d <= L.r1) throw std::invalid_argument("detune: r2 factor pushes r2 below r1");
  const RadialTensor shell = c.detune.lens_shell_minus_identity
                                 ? RadialTensor::isotropic(-1.0)
                                 : lens_shell_tensor(c.alpha, r2d);
  const RadialTensor match = RadialTensor::isotropic(c.m);
  std::vector<LayeredMedium::Shell> shells = {
      {c.object.eps, c.object.mu, false}, {match, match, false}, {shell, shell, true}};
  return LayeredMedium({L.r0, L.r1, r2d}, std::move(shells), delta);
}

// Maps belonging to the (possibly detuned) lens-shell geometry.
inline std::pair<RadialMap, RadialMap> config_maps(const ExperimentConfig& c) {
  const LensRadii L = config_lens(c);
  const double r2 = c.detune.r2_factor * L.r2;
  const double r3 = std::pow(r2, c.alpha) / std::pow(L.r1, c.alpha - 1.0);
  return {RadialMap(c.alpha, r2), RadialMap(L.beta, r3)};
}

// Auto n_max: smallest n whose incident band drops below 1e-10 of the total,
// capped at 40.
inline int choose_n_max(const ExperimentConfig& c, double projection_radius) {
  constexpr int cap = 40;
  const MultipoleCoefficients probe =
      expand_source_to_multipoles(c.source, c.k, cap, projection_radius);
  const double total = probe.total_content(projection_radius);
  for (int n = 2; n <= cap; ++n) {
    if (std::sqrt(probe.band_content(n, projection_radius) / total) < 1e-10) return n;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Rate fit.
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
  int dropped = 0;
};

// Least squares on (log10 delta, log10 error); zero errors are dropped and
// counted.
inline RateFit fit_rate(const std::vector<double>& deltas, const std::vector<double>& errors) {
  if (deltas.size() != errors.size()) throw std::invalid_argument("fit_rate: size mismatch");
  if (deltas.size() < 4) throw std::invalid_argument("fit_rate: need at least 4 points");
  std::vector<double> x, y;
  RateFit fit;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("fit_rate: deltas must be positive");
    if (errors[i] <= 0.0) {
      ++fit.dropped;
      continue;
    }
    x.push_back(std::log10(deltas[i]));
    y.push_back(std::log10(errors[i]));
  }
  if (x.size() < 2) throw std::runtime_error("fit_rate: fewer than 2 usable points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

// ---------------------------------------------------------------------------
// Delta sweep.
// ---------------------------------------------------------------------------

struct ConvergenceReport {
  ExperimentConfig config;
  std::vector<double> deltas;
  std::vector<double> spectral_errors;  // incident-weighted l2 of |s_n - s_hat_n|
  std::vector<double> field_errors;     // H(curl)-weighted probe-sphere discrepancy
  std::vector<double> energies;         // energy_norm on the ball 1.2 r3
  double slope = 0.0, intercept = 0.0, residual = 0.0;
  bool pass = false;
  ScatteringSpectrum hat;
  std::vector<ScatteringSpectrum> lens_spectra;
};

namespace detail {

// Exterior field difference of two spectra on the probe sphere: the incident
// parts cancel, so only (s_n - s_hat_n)-weighted outgoing modes remain.  The
// H(curl) surface density in vacuum is (1 + k^2)(|dE|^2 + |dH|^2).
inline double probe_sphere_error(const ScatteringSpectrum& a, const ScatteringSpectrum& b,
                                 const MultipoleCoefficients& inc, double radius,
                                 int n_theta = 24) {
  const double k = inc.k();
  const int nm = std::min({a.n_max, b.n_max, inc.n_max()});
  const SphereQuadrature quad(n_theta, 2 * n_theta);
  double acc = 0.0;
  for (const auto& node : quad.nodes) {
    const Vec3 x = radius * node.xhat;
    CVec3 dE = CVec3::Zero(), dH = CVec3::Zero();
    const VshEvaluator vsh(nm, node.xhat);
    const cplx z(k * radius, 0.0);
    for (int n = 1; n <= nm; ++n) {
      const Riccati f = riccati_xi(n, z);
      const cplx fn = f.value / z;
      const double lam = std::sqrt(n * (n + 1.0));
      const cplx radial = cplx(0, 1) * lam * f.value / (z * z);
      const cplx tangent = cplx(0, 1) * f.deriv / z;
      for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
        const cplx ds = a.coeff({n, pol}) - b.coeff({n, pol});
        if (ds == cplx(0)) continue;
        for (int m = -n; m <= n; ++m) {
          const cplx w = inc.at(n, m, pol) * ds;
          if (w == cplx(0)) continue;
          const CVec3 P = vsh.P(n, m), B = vsh.B(n, m), C = vsh.C(n, m);
          if (pol == Polarization::TE) {
            dE += w * fn * C;
            dH += w * (radial * P + tangent * B);
          } else {
            dE += w * (-radial * P - tangent * B);
            dH += w * fn * C;
          }
        }
      }
    }
    acc += node.weight * (dE.squaredNorm() + dH.squaredNorm());
  }
  return std::sqrt((1.0 + k * k) * radius * radius * acc);
}

// Incident-content-weighted l2 distance of two spectra; the weights are the
// mode strengths at the reference radius, the Parseval surrogate for the
// exterior field comparison.
inline double spectral_error(const ScatteringSpectrum& s, const ScatteringSpectrum& hat,
                             const MultipoleCoefficients& inc, double reference_radius) {
  const int nm = std::min({s.n_max, hat.n_max, inc.n_max()});
  double num = 0.0, den = 0.0;
  for (int n = 1; n <= nm; ++n) {
    for (const Polarization pol : {Polarization::TE, Polarization::TM}) {
      const double w = inc.content_weight(n, pol, reference_radius);
      num += w * std::norm(s.coeff({n, pol}) - hat.coeff({n, pol}));
      den += w;
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace detail

// Runs the sweep: for each delta, solves the lens problem, compares its
// spectrum and exterior probe-sphere field against the magnified-object
// problem, and records the ball energy.  Sweep points run concurrently.
inline ConvergenceReport run_delta_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.detune.any())
    throw std::invalid_argument("run_delta_sweep: sweep requires the matched lens");
  ConvergenceReport rep;
  rep.config = cfg;
  const LensRadii L = config_lens(cfg);

  const auto [F, G] = config_maps(cfg);
  const ComplementarityReport audit = check_reflecting_complementary(
      assemble_from_config(cfg, 0.0), F, G, cfg.checker_samples, cfg.checker_tol);
  if (!audit.pass)
    throw std::runtime_error(std::string("run_delta_sweep: complementarity audit failed on ") +
                             to_string(audit.failed_condition));

  if (cfg.source.kind == SourceSpec::Kind::electric_dipole &&
      cfg.source.position.norm() <= L.r3)
    throw std::invalid_argument("run_delta_sweep: dipole must lie outside the outer sphere");

  const double proj_radius = L.r2;
  const int n_max = cfg.n_max > 0 ? cfg.n_max : choose_n_max(cfg, proj_radius);
  const MultipoleCoefficients inc =
      expand_source_to_multipoles(cfg.source, cfg.k, n_max, proj_radius);

  rep.hat = hat_spectrum(L, cfg.object, cfg.k, n_max);
  const double probe_radius = cfg.probe_radius_factor * L.r3;

  struct Point {
    ScatteringSpectrum spectrum;
    double spec_err, field_err, energy;
  };
  auto run_point = [&](double delta) -> Point {
    const LayeredMedium med = assemble_from_config(cfg, delta);
    LayeredSolve solve(med, cfg.k, n_max);
    Point p;
    p.spectrum = solve.spectrum();
    p.spec_err = detail::spectral_error(p.spectrum, rep.hat, inc, L.r2);
    p.field_err = detail::probe_sphere_error(p.spectrum, rep.hat, inc, probe_radius);
    p.energy = energy_norm(solve, inc, 0.0, 1.2 * L.r3);
    return p;
  };

  std::vector<std::future<Point>> futures;
  futures.reserve(cfg.delta_grid.size());
  for (double d : cfg.delta_grid)
    futures.push_back(std::async(std::launch::async, run_point, d));
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    Point p = futures[i].get();
    rep.deltas.push_back(cfg.delta_grid[i]);
    rep.spectral_errors.push_back(p.spec_err);
    rep.field_errors.push_back(p.field_err);
    rep.energies.push_back(p.energy);
    rep.lens_spectra.push_back(std::move(p.spectrum));
  }

  const RateFit fit = fit_rate(rep.deltas, rep.spectral_errors);
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;
  rep.residual = fit.residual;
  rep.pass = fit.slope >= cfg.slope_window_lo && fit.slope <= cfg.slope_window_hi;
  return rep;
}

// ---------------------------------------------------------------------------
// Blow-up probe.
// ---------------------------------------------------------------------------

struct BlowupReport {
  ExperimentConfig config;
  std::vector<double> deltas;
  std::vector<double> energies;
  bool divergence_flag = false;  // energy grew >= 10x from largest to smallest delta
};

inline BlowupReport run_blowup_probe(const ExperimentConfig& cfg) {
  cfg.validate();
  BlowupReport rep;
  rep.config = cfg;
  const LensRadii L = config_lens(cfg);
  const double proj_radius = L.r2;
  const int n_max = cfg.n_max > 0 ? cfg.n_max : choose_n_max(cfg, proj_radius);
  const MultipoleCoefficients inc =
      expand_source_to_multipoles(cfg.source, cfg.k, n_max, proj_radius);

  auto run_point = [&](double delta) -> double {
    const LayeredMedium med = assemble_from_config(cfg, delta);
    LayeredSolve solve(med, cfg.k, n_max);
    return energy_norm(solve, inc, 0.0, 1.2 * L.r3);
  };
  std::vector<std::future<double>> futures;
  for (double d : cfg.delta_grid)
    futures.push_back(std::async(std::launch::async, run_point, d));
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    rep.deltas.push_back(cfg.delta_grid[i]);
    rep.energies.push_back(futures[i].get());
  }
  rep.divergence_flag = rep.energies.back() >= 10.0 * rep.energies.front();
  return rep;
}

// ---------------------------------------------------------------------------
// Report emission.  Byte-stable for identical inputs: fixed %.17g formatting,
// ordered keys, no timestamps.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_spectrum_csv(const std::string& path, const ScatteringSpectrum& sp) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_spectrum_csv: cannot open " + path);
  std::fprintf(f, "n,pol,re_s,im_s\n");
  for (int n = 1; n <= sp.n_max; ++n) {
    std::fprintf(f, "%d,TE,%.17g,%.17g\n", n, sp.te[n - 1].real(), sp.te[n - 1].imag());
    std::fprintf(f, "%d,TM,%.17g,%.17g\n", n, sp.tm[n - 1].real(), sp.tm[n - 1].imag());
  }
  std::fclose(f);
}

// CSV (delta, spectral_error, field_error, energy) + JSON summary with the
// fit, the pass verdict, and the full config echo.
inline void emit_report(const ConvergenceReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("emit_report: cannot create " + dir + ": " + ec.message());

  const std::string csv_path = (fs::path(dir) / "sweep.csv").string();
  std::FILE* f = std::fopen(csv_path.c_str(), "w");
  if (!f) throw std::runtime_error("emit_report: cannot open " + csv_path);
  std::fprintf(f, "delta,spectral_error,field_error,energy\n");
  for (std::size_t i = 0; i < rep.deltas.size(); ++i)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", rep.deltas[i], rep.spectral_errors[i],
                 rep.field_errors[i], rep.energies[i]);
  std::fclose(f);

  json j;
  j["slope"] = rep.slope;
  j["intercept"] = rep.intercept;
  j["residual"] = rep.residual;
  j["pass"] = rep.pass;
  j["config"] = to_json(rep.config);
  std::ofstream out(fs::path(dir) / "summary.json");
  if (!out) throw std::runtime_error("emit_report: cannot open summary.json in " + dir);
  out << j.dump(2) << "\n";

  for (std::size_t i = 0; i < rep.lens_spectra.size(); ++i) {
    char name[96];
    std::snprintf(name, sizeof name, "spectrum_delta_%.6g_k_%.6g.csv", rep.deltas[i],
                  rep.lens_spectra[i].k);
    write_spectrum_csv((fs::path(dir) / name).string(), rep.lens_spectra[i]);
  }
  write_spectrum_csv((fs::path(dir) / "spectrum_hat.csv").string(), rep.hat);
}

inline void emit_blowup_report(const BlowupReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("emit_blowup_report: cannot create " + dir);
  const std::string csv_path = (fs::path(dir) / "blowup.csv").string();
  std::FILE* f = std::fopen(csv_path.c_str(), "w");
  if (!f) throw std::runtime_error("emit_blowup_report: cannot open " + csv_path);
  std::fprintf(f, "delta,energy\n");
  for (std::size_t i = 0; i < rep.deltas.size(); ++i)
    std::fprintf(f, "%.17g,%.17g\n", rep.deltas[i], rep.energies[i]);
  std::fclose(f);
  json j;
  j["divergence_flag"] = rep.divergence_flag;
  j["energy_ratio"] = rep.energies.empty() ? 0.0 : rep.energies.back() / rep.energies.front();
  j["config"] = to_json(rep.config);
  std::ofstream out(fs::path(dir) / "blowup.json");
  out << j.dump(2) << "\n";
}

// Output directory resolution: flag > CMLENS_OUTPUT_DIR > config.
inline std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CMLENS_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

}  // namespace cmlens
