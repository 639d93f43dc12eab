// geoflow command line: wave | evolve | compare | sweep | check.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 invariant violation beyond tolerance.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "geoflow/experiment.hpp"

namespace fs = std::filesystem;
using namespace geoflow;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::size_t> grid_n;
  std::optional<double> t_end;
};

void add_common(CLI::App* app, Common& c, bool overrides = true) {
  app->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory (overrides output_dir)");
  if (overrides) {
    app->add_option("--grid-n", c.grid_n, "number of grid intervals (overrides grid_n)");
    app->add_option("--t-end", c.t_end, "final time (overrides t_end)");
  }
}

ExperimentConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.grid_n) cfg.grid_n = *c.grid_n;
  if (c.t_end) cfg.t_end = *c.t_end;
  cfg.validate();
  return cfg;
}

int cmd_wave(const Common& c) {
  const auto cfg = load(c);
  const auto w = config_wave(cfg, cfg.grid_n);
  io::write_file(fs::path(cfg.output_dir) / "wave.json", io::to_json(w));
  std::printf("c = %.17g\nlength = %.17g\narea = %.17g\nspan = %.17g\n", w.c, w.length, w.area, wave_span(w));
  return exit_ok;
}

int cmd_evolve(const Common& c) {
  const auto cfg = load(c);
  const auto s = run(cfg);
  std::printf("status: %s\n", s.status.c_str());
  if (!s.message.empty()) std::printf("message: %s\n", s.message.c_str());
  std::printf("t_final = %.6g  steps = %zu  records = %zu\n", s.t_final, s.steps, s.records);
  std::printf("wave speed c = %.10g\n", s.wave.c);
  std::printf("kappa_dist_to_wave: %.3e -> %.3e\n", s.initial.kappa_dist_to_wave, s.last.kappa_dist_to_wave);
  std::printf("fitted log-slope = %.6g (R^2 = %.6f)\n", s.fit.slope, s.fit.r2);
  std::printf("max relative area drift = %.3e\n", s.stats.max_rel_area_drift);
  std::printf("output: %s\n", cfg.output_dir.c_str());
  return s.exit_code;
}

int cmd_compare(const Common& c) {
  const auto cfg = load(c);
  const auto r = compare(cfg);
  io::write_file(fs::path(cfg.output_dir) / "compare.json", to_json(r));
  for (const auto* lv : {&r.coarse, &r.fine}) {
    if (lv->theta_ran)
      std::printf("n = %zu: max Hausdorff gap %.6e\n", lv->n, lv->max_gap);
    else
      std::printf("n = %zu: partial (%s)\n", lv->n, lv->theta_note.c_str());
  }
  if (r.ratio) std::printf("refinement ratio = %.4f\n", *r.ratio);
  const double vr = std::max(r.coarse.v_range_violation, r.fine.v_range_violation);
  if (vr > 1e-12) {
    std::printf("angle values left [-psi_plus, psi_minus] by %.3e\n", vr);
    return exit_invariant;
  }
  return exit_ok;
}

int cmd_sweep(const std::string& file, const std::string& out) {
  const auto configs = load_sweep(file, out);
  const std::size_t threads = sweep_threads(configs.size());
  std::printf("%zu runs on %zu thread(s)\n", configs.size(), threads);
  const auto entries = sweep(configs, threads);
  io::write_file(fs::path(out) / "index.json", sweep_index(entries));
  for (const auto& e : entries) std::printf("%-24s %s\n", e.name.c_str(), e.status.c_str());
  return exit_ok;
}

int cmd_check(const std::string& snapshot, const std::string& out) {
  const auto rep = check_snapshot(io::read_file(snapshot));
  const auto j = to_json(rep);
  if (!out.empty()) io::write_file(fs::path(out) / "check.json", j);
  for (const auto& i : rep.items)
    std::printf("%-4s %-26s %.6e (tol %.1e)\n", i.passed ? "ok" : "FAIL", i.name.c_str(), i.value, i.tolerance);
  return rep.passed() ? exit_ok : exit_invariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Area-preserving curvature flow with sliding endpoints"};
  app.require_subcommand(1);

  Common wave_opt, evolve_opt, compare_opt;
  auto* wave = app.add_subcommand("wave", "build the traveling wave and write wave.json");
  add_common(wave, wave_opt);
  auto* evolve = app.add_subcommand("evolve", "evolve the initial curve and monitor it against the wave");
  add_common(evolve, evolve_opt);
  auto* cmp = app.add_subcommand("compare", "run both solvers from the same curve and compare them");
  add_common(cmp, compare_opt);

  std::string sweep_file, sweep_out = "sweep_out";
  auto* sw = app.add_subcommand("sweep", "run a list of configs in parallel (GEOFLOW_THREADS caps workers)");
  sw->add_option("--config", sweep_file, "sweep file (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", sweep_out, "output root directory");

  std::string snapshot, check_out;
  auto* chk = app.add_subcommand("check", "run the invariant checks on a snapshot file");
  chk->add_option("snapshot", snapshot, "snapshot JSON")->required()->check(CLI::ExistingFile);
  chk->add_option("--out", check_out, "directory for check.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }

  try {
    if (*wave) return cmd_wave(wave_opt);
    if (*evolve) return cmd_evolve(evolve_opt);
    if (*cmp) return cmd_compare(compare_opt);
    if (*sw) return cmd_sweep(sweep_file, sweep_out);
    if (*chk) return cmd_check(snapshot, check_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_solver;
  }
  return exit_ok;
}
