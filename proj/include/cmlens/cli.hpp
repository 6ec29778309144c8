#pragma once

// Command-line driver.  Exit codes: 0 pass, 1 acceptance failure, 2 usage
// error.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "cmlens/harness.hpp"

namespace cmlens {

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"cmlens - layered complementary-media lens laboratory"};
  app.require_subcommand(1);

  // lens-params
  double m = 2.0, r0 = 1.0, alpha = 2.0;
  auto* lens_cmd = app.add_subcommand("lens-params", "print the lens radii and beta");
  lens_cmd->add_option("--m", m, "magnification (> 1)")->required();
  lens_cmd->add_option("--r0", r0, "object radius (> 0)")->required();
  lens_cmd->add_option("--alpha", alpha, "map exponent (> 1)")->required();

  // tensor
  double t_alpha = 2.0, t_r2 = 2.0, t_r = 1.0, t_delta = 0.0;
  auto* tensor_cmd = app.add_subcommand("tensor", "print the lens-shell tensor at radius r");
  tensor_cmd->add_option("--alpha", t_alpha)->required();
  tensor_cmd->add_option("--r2", t_r2)->required();
  tensor_cmd->add_option("--r", t_r)->required();
  tensor_cmd->add_option("--delta", t_delta, "loss added to the imaginary part");

  // config-driven subcommands
  std::string config_path, out_dir;
  double solve_delta = 1e-2;
  int chk_samples = 0;
  double chk_tol = 0.0;
  auto* check_cmd = app.add_subcommand("check-complementary", "audit the assembled lens");
  check_cmd->add_option("--config", config_path, "JSON config")->required();
  check_cmd->add_option("--samples", chk_samples, "override sample count");
  check_cmd->add_option("--tol", chk_tol, "override tolerance");

  auto* solve_cmd = app.add_subcommand("solve", "write the scattering spectrum at one delta");
  solve_cmd->add_option("--config", config_path, "JSON config")->required();
  auto* delta_opt = solve_cmd->add_option("--delta", solve_delta, "loss parameter (default: config delta)");
  solve_cmd->add_option("--out", out_dir, "output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "delta sweep and rate fit");
  sweep_cmd->add_option("--config", config_path, "JSON config")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");

  auto* blowup_cmd = app.add_subcommand("blowup", "energy growth probe over the delta grid");
  blowup_cmd->add_option("--config", config_path, "JSON config")->required();
  blowup_cmd->add_option("--out", out_dir, "output directory");

  std::vector<double> fit_deltas, fit_errors, fit_window;
  std::string fit_csv;
  auto* fit_cmd = app.add_subcommand("rate-fit", "log-log slope of errors vs deltas");
  fit_cmd->add_option("--deltas", fit_deltas, "delta values")->delimiter(',');
  fit_cmd->add_option("--errors", fit_errors, "error values")->delimiter(',');
  fit_cmd->add_option("--csv", fit_csv, "sweep.csv produced by the sweep command");
  fit_cmd->add_option("--window", fit_window, "acceptance window lo,hi")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (lens_cmd->parsed()) {
      const LensRadii L = lens_radii(m, r0, alpha);
      std::printf("r1 = %.17g\nr2 = %.17g\nr3 = %.17g\nbeta = %.17g\n", L.r1, L.r2, L.r3, L.beta);
      return 0;
    }
    if (tensor_cmd->parsed()) {
      const auto [rad, tan] = lens_tensor_closed_form(t_alpha, t_r2, t_r);
      std::printf("radial = %.17g%+.17gi\ntangential = %.17g%+.17gi\n", rad, t_delta, tan,
                  t_delta);
      return 0;
    }
    if (check_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const int samples = chk_samples > 0 ? chk_samples : cfg.checker_samples;
      const double tol = chk_tol > 0.0 ? chk_tol : cfg.checker_tol;
      const auto [F, G] = config_maps(cfg);
      const ComplementarityReport rep =
          check_reflecting_complementary(assemble_from_config(cfg, 0.0), F, G, samples, tol);
      std::printf("pass = %s\nmax_violation = %.17g\nfailed_condition = %s\n",
                  rep.pass ? "true" : "false", rep.max_violation,
                  to_string(rep.failed_condition));
      return rep.pass ? 0 : 1;
    }
    if (solve_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      if (delta_opt->count() == 0) solve_delta = cfg.delta;
      const LensRadii L = config_lens(cfg);
      const int n_max = cfg.n_max > 0 ? cfg.n_max : choose_n_max(cfg, L.r2);
      const ScatteringSpectrum sp =
          scattering_coefficients(assemble_from_config(cfg, solve_delta), cfg.k, n_max);
      const std::string dir = resolve_output_dir(cfg, out_dir);
      std::filesystem::create_directories(dir);
      char name[96];
      std::snprintf(name, sizeof name, "spectrum_delta_%.6g_k_%.6g.csv", solve_delta, cfg.k);
      const std::string path = (std::filesystem::path(dir) / name).string();
      write_spectrum_csv(path, sp);
      std::printf("wrote %s\n", path.c_str());
      if (!sp.resonances.empty())
        std::printf("resonant modes: %zu (see matching conditions)\n", sp.resonances.size());
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const ConvergenceReport rep = run_delta_sweep(cfg);
      const std::string dir = resolve_output_dir(cfg, out_dir);
      emit_report(rep, dir);
      std::printf("slope = %.6g  intercept = %.6g  residual = %.6g  pass = %s\n", rep.slope,
                  rep.intercept, rep.residual, rep.pass ? "true" : "false");
      std::printf("wrote %s/sweep.csv and summary.json\n", dir.c_str());
      return rep.pass ? 0 : 1;
    }
    if (blowup_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const BlowupReport rep = run_blowup_probe(cfg);
      const std::string dir = resolve_output_dir(cfg, out_dir);
      emit_blowup_report(rep, dir);
      for (std::size_t i = 0; i < rep.deltas.size(); ++i)
        std::printf("delta = %-10.4g energy = %.10g\n", rep.deltas[i], rep.energies[i]);
      std::printf("divergence_flag = %s\n", rep.divergence_flag ? "true" : "false");
      // pass when the probe outcome matches the documented configuration
      return rep.divergence_flag == rep.config.detune.any() ? 0 : 1;
    }
    if (fit_cmd->parsed()) {
      if (!fit_csv.empty()) {
        std::ifstream in(fit_csv);
        if (!in) throw std::runtime_error("cannot open " + fit_csv);
        std::string line;
        std::getline(in, line);  // header
        fit_deltas.clear();
        fit_errors.clear();
        while (std::getline(in, line)) {
          double d, e;
          if (std::sscanf(line.c_str(), "%lg,%lg", &d, &e) == 2) {
            fit_deltas.push_back(d);
            fit_errors.push_back(e);
          }
        }
      }
      const RateFit fit = fit_rate(fit_deltas, fit_errors);
      std::printf("slope = %.17g\nintercept = %.17g\nresidual = %.17g\n", fit.slope,
                  fit.intercept, fit.residual);
      if (fit.dropped > 0) std::printf("dropped %d zero-error points\n", fit.dropped);
      if (fit_window.size() == 2)
        return (fit.slope >= fit_window[0] && fit.slope <= fit_window[1]) ? 0 : 1;
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace cmlens
