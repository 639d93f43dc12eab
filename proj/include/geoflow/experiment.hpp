#pragma once

// Experiment plumbing: configuration, initial data, single runs, the
// two-solver comparison, sweeps and the snapshot checker. Everything that
// touches the file system lives here and in json_io.hpp.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "geoflow/angle_flow.hpp"
#include "geoflow/diagnostics.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/json_io.hpp"
#include "geoflow/theta_flow.hpp"
#include "geoflow/traveling_wave.hpp"

namespace geoflow {

enum class InitialKind { wave, perturbed_wave, arc, custom_file };

inline const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::wave: return "wave";
    case InitialKind::perturbed_wave: return "perturbed_wave";
    case InitialKind::arc: return "arc";
    case InitialKind::custom_file: return "custom_file";
  }
  return "?";
}

struct Tolerances {
  double area_rel = 1e-6;        ///< max relative area drift
  double monotonicity = 1e-7;    ///< per-record E increase / normalized F~ decrease
  double isoperimetric = 1e-9;   ///< slack in L >= sqrt(2 pi A(0))
  double holder = 1e-14;         ///< how negative the raw Hoelder gap may get
  double concavity_floor = 1e-6;
  double boundary = 1e-10;       ///< endpoint residual accepted by `check`
};

struct ExperimentConfig {
  std::string name;
  ContactAngles angles;
  std::size_t grid_n = 256;
  double t_end = 1.0;
  std::size_t snapshot_stride = 100;   ///< solver steps between diagnostics records
  std::size_t snapshot_every = 10;     ///< records between snapshot JSON files
  InitialKind initial_kind = InitialKind::wave;
  double epsilon = 0.05;
  int mode = 2;  ///< mode 1 is nearly a multiple of sin(theta), which the endpoint projection removes
  std::string custom_path;
  double safety_factor = 0.5;
  /// Length of the reference wave the initial data is built from.
  double length_scale = 1.0;
  std::string output_dir = "geoflow_out";
  bool track_hausdorff = true;
  std::size_t compare_samples = 10;
  Tolerances tol;

  void validate() const {
    try {
      angles.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    if (grid_n < 16 || grid_n % 2 != 0) throw ConfigError("grid_n must be even and >= 16");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
    if (snapshot_stride == 0) throw ConfigError("snapshot_stride must be positive");
    if (snapshot_every == 0) throw ConfigError("snapshot_every must be positive");
    if (!(safety_factor > 0.0 && safety_factor <= 1.0)) throw ConfigError("safety_factor must lie in (0, 1]");
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) throw ConfigError("length_scale must be positive");
    if (compare_samples == 0) throw ConfigError("compare_samples must be positive");
    if (initial_kind == InitialKind::perturbed_wave) {
      if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("epsilon must be a nonnegative number");
      if (mode < 1) throw ConfigError("mode must be >= 1");
    }
    if (initial_kind == InitialKind::arc && !angles.symmetric())
      throw ConfigError("an arc has both endpoints on the axis only when psi_plus == psi_minus");
    if (initial_kind == InitialKind::custom_file && custom_path.empty())
      throw ConfigError("custom_file initial data needs a path");
  }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {

inline void reject_unknown(const io::json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
}

template <class T>
void read_key(const io::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const io::json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

inline void read_size(const io::json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("key '") + key + "' must be a nonnegative integer");
  out = v.get<std::size_t>();
}

}  // namespace detail

/// Parse a config object. Unknown keys are errors; missing keys keep their
/// defaults except the two angles, which are required.
inline ExperimentConfig config_from_json(const io::json& j, const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown(j,
                         {"name", "psi_plus", "psi_minus", "grid_n", "t_end", "snapshot_stride",
                          "snapshot_every", "initial", "safety_factor", "length_scale", "output_dir",
                          "track_hausdorff", "compare_samples", "tolerances"},
                         "config");
  ExperimentConfig c;
  if (!j.contains("psi_plus") || !j.contains("psi_minus"))
    throw ConfigError("config needs psi_plus and psi_minus");
  detail::read_key(j, "name", c.name);
  detail::read_key(j, "psi_plus", c.angles.psi_plus);
  detail::read_key(j, "psi_minus", c.angles.psi_minus);
  detail::read_size(j, "grid_n", c.grid_n);
  detail::read_key(j, "t_end", c.t_end);
  detail::read_size(j, "snapshot_stride", c.snapshot_stride);
  detail::read_size(j, "snapshot_every", c.snapshot_every);
  detail::read_key(j, "safety_factor", c.safety_factor);
  detail::read_key(j, "length_scale", c.length_scale);
  detail::read_key(j, "output_dir", c.output_dir);
  detail::read_key(j, "track_hausdorff", c.track_hausdorff);
  detail::read_size(j, "compare_samples", c.compare_samples);

  if (j.contains("initial")) {
    const auto& ini = j.at("initial");
    detail::reject_unknown(ini, {"kind", "epsilon", "mode", "path"}, "initial");
    std::string kind = "wave";
    detail::read_key(ini, "kind", kind);
    if (kind == "wave") c.initial_kind = InitialKind::wave;
    else if (kind == "perturbed_wave") c.initial_kind = InitialKind::perturbed_wave;
    else if (kind == "arc") c.initial_kind = InitialKind::arc;
    else if (kind == "custom_file") c.initial_kind = InitialKind::custom_file;
    else throw ConfigError("unknown initial kind '" + kind + "'");
    detail::read_key(ini, "epsilon", c.epsilon);
    detail::read_key(ini, "mode", c.mode);
    detail::read_key(ini, "path", c.custom_path);
    if (!c.custom_path.empty() && !base_dir.empty() && std::filesystem::path(c.custom_path).is_relative())
      c.custom_path = (base_dir / c.custom_path).string();
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::reject_unknown(t, {"area_rel", "monotonicity", "isoperimetric", "holder", "concavity_floor", "boundary"},
                           "tolerances");
    detail::read_key(t, "area_rel", c.tol.area_rel);
    detail::read_key(t, "monotonicity", c.tol.monotonicity);
    detail::read_key(t, "isoperimetric", c.tol.isoperimetric);
    detail::read_key(t, "holder", c.tol.holder);
    detail::read_key(t, "concavity_floor", c.tol.concavity_floor);
    detail::read_key(t, "boundary", c.tol.boundary);
  }
  return c;
}

inline io::json to_json(const ExperimentConfig& c) {
  io::json ini{{"kind", to_string(c.initial_kind)}};
  if (c.initial_kind == InitialKind::perturbed_wave) {
    ini["epsilon"] = c.epsilon;
    ini["mode"] = c.mode;
  }
  if (c.initial_kind == InitialKind::custom_file) ini["path"] = c.custom_path;
  return io::json{{"name", c.name},
                  {"psi_plus", c.angles.psi_plus},
                  {"psi_minus", c.angles.psi_minus},
                  {"grid_n", c.grid_n},
                  {"t_end", c.t_end},
                  {"snapshot_stride", c.snapshot_stride},
                  {"snapshot_every", c.snapshot_every},
                  {"initial", ini},
                  {"safety_factor", c.safety_factor},
                  {"length_scale", c.length_scale},
                  {"output_dir", c.output_dir},
                  {"track_hausdorff", c.track_hausdorff},
                  {"compare_samples", c.compare_samples},
                  {"tolerances",
                   {{"area_rel", c.tol.area_rel},
                    {"monotonicity", c.tol.monotonicity},
                    {"isoperimetric", c.tol.isoperimetric},
                    {"holder", c.tol.holder},
                    {"concavity_floor", c.tol.concavity_floor},
                    {"boundary", c.tol.boundary}}}};
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(io::read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Initial data

struct PerturbedProfile {
  CurvatureProfile profile;
  double delta = 0.0;       ///< coefficient of the sin(theta) correction
  double beta_left = 0.0;   ///< coefficients of the boundary-layer corrections
  double beta_right = 0.0;
};

namespace detail {

/// Residuals of the two boundary conditions for the solver's own one-sided
/// derivative.
inline std::pair<double, double> discrete_bc(const CurvatureProfile& q, const numerics::TrigStencils& st) {
  const double KL = q.angles.total() / length_of(q);
  return {st.d1_left(q.kappa) + cot_angle(q.angles.psi_plus) * (q.kappa.front() + KL),
          st.d1_right(q.kappa) - cot_angle(q.angles.psi_minus) * (q.kappa.back() + KL)};
}

}  // namespace detail

/// kappa_0 = kappa_W (1 + eps cos(m pi u) + delta sin(theta) + beta_l b_l(u) + beta_r b_r(u)),
/// u = (theta + psi_plus) / K in [0, 1].
///
/// delta is fixed by a secant iteration so the endpoints lie on the axis.
/// The cubic corrections b_l = K u (1-u)^2 and b_r = -K (1-u) u^2 have unit
/// slope at one end and vanish, with zero slope, at the other; their
/// coefficients make the data satisfy the angle boundary conditions of the
/// discrete flow, so the run starts without an initial layer.
inline PerturbedProfile perturb_wave(const TravelingWave& w, double eps, int mode) {
  const auto& a = w.angles;
  const double K = a.total(), pp = a.psi_plus;
  const std::size_t n = w.profile.intervals();
  const numerics::TrigStencils st(w.profile.spacing());
  std::vector<double> phi(n + 1), sn(n + 1), bl(n + 1), br(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double th = w.profile.grid[i];
    const double u = (th + pp) / K;
    phi[i] = std::cos(mode * std::numbers::pi * u);
    sn[i] = std::sin(th);
    bl[i] = K * u * (1.0 - u) * (1.0 - u);
    br[i] = -K * (1.0 - u) * u * u;
  }
  auto shape = [&](double d, double l, double r) {
    CurvatureProfile q = w.profile;
    for (std::size_t i = 0; i <= n; ++i) q.kappa[i] *= 1.0 + eps * phi[i] + d * sn[i] + l * bl[i] + r * br[i];
    return q;
  };
  // The boundary conditions are nearly linear in (beta_l, beta_r); the length
  // they involve is refreshed each pass.
  auto with_bc = [&](double d, double& l, double& r) {
    constexpr double step = 1e-3;
    for (int it = 0; it < 8; ++it) {
      const auto r0 = detail::discrete_bc(shape(d, l, r), st);
      if (std::max(std::abs(r0.first), std::abs(r0.second)) < 1e-14) break;
      const auto r1 = detail::discrete_bc(shape(d, l + step, r), st);
      const auto r2 = detail::discrete_bc(shape(d, l, r + step), st);
      const double a11 = (r1.first - r0.first) / step, a21 = (r1.second - r0.second) / step;
      const double a12 = (r2.first - r0.first) / step, a22 = (r2.second - r0.second) / step;
      const double det = a11 * a22 - a12 * a21;
      if (!(std::abs(det) > 0.0)) throw Error("boundary correction is singular");
      l += (-r0.first * a22 + r0.second * a12) / det;
      r += (-a11 * r0.second + a21 * r0.first) / det;
    }
    return shape(d, l, r);
  };

  double l = 0.0, r = 0.0;
  auto residual = [&](double d) {
    auto q = with_bc(d, l, r);
    return endpoint_residual(q);
  };
  double d0 = 0.0, d1 = 0.01;
  double f0 = residual(d0), f1 = residual(d1);
  for (int it = 0; it < 60 && std::abs(f1) > 1e-15 && f1 != f0; ++it) {
    const double d2 = d1 - f1 * (d1 - d0) / (f1 - f0);
    d0 = d1;
    f0 = f1;
    d1 = d2;
    f1 = residual(d1);
  }
  PerturbedProfile out{with_bc(d1, l, r), d1, l, r};
  if (!(std::abs(endpoint_residual(out.profile)) <= 1e-12))
    throw Error("could not project the perturbed profile onto the endpoint constraint");
  return out;
}

/// Largest epsilon (to three digits) for which perturb_wave keeps kappa
/// below -floor.
inline double max_admissible_epsilon(const TravelingWave& w, int mode, double floor, double hi) {
  auto ok = [&](double e) {
    try {
      auto p = perturb_wave(w, e, mode);
      return *std::max_element(p.profile.kappa.begin(), p.profile.kappa.end()) < -floor;
    } catch (const Error&) {
      return false;
    }
  };
  double lo = 0.0;
  while (hi - lo > 1e-3 * std::max(hi, 1e-3)) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

/// Scalar projection kappa -> kappa (1 + delta sin theta) onto the endpoint
/// constraint; used for user-supplied profiles.
inline CurvatureProfile project_endpoint(const CurvatureProfile& p) {
  auto shaped = [&](double d) {
    CurvatureProfile q = p;
    for (std::size_t i = 0; i < q.kappa.size(); ++i) q.kappa[i] *= 1.0 + d * std::sin(q.grid[i]);
    return q;
  };
  double d0 = 0.0, d1 = 1e-3;
  double f0 = endpoint_residual(p), f1 = endpoint_residual(shaped(d1));
  for (int it = 0; it < 60 && std::abs(f1) > 1e-15 && f1 != f0; ++it) {
    const double d2 = d1 - f1 * (d1 - d0) / (f1 - f0);
    d0 = d1;
    f0 = f1;
    d1 = d2;
    f1 = endpoint_residual(shaped(d1));
  }
  auto q = shaped(d1);
  if (!(std::abs(endpoint_residual(q)) <= 1e-12)) throw ConfigError("cannot project the profile onto the endpoint constraint");
  return q;
}

/// Cubic resampling of a profile onto the n-interval grid of its angles.
inline CurvatureProfile resample(const CurvatureProfile& p, std::size_t n) {
  if (p.intervals() == n) return p;
  return CurvatureProfile::sample(p.angles, n,
                                  [&](double th) { return numerics::interpolate_cubic(p.grid, p.kappa, th); });
}

/// Unit-length wave; a grid that cannot resolve it is a configuration problem.
inline TravelingWave unit_wave(const ContactAngles& angles, std::size_t n) {
  try {
    return build_wave(angles, n);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

/// Reference wave (unit length, scaled by length_scale) for a config.
inline TravelingWave config_wave(const ExperimentConfig& cfg, std::size_t n) {
  return scale_to_length(unit_wave(cfg.angles, n), cfg.length_scale);
}

/// Initial data loaded from a custom file: either a curvature profile
/// (theta/kappa) or an angle state (v, optionally z/eta/x_left).
struct CustomInitial {
  std::optional<CurvatureProfile> profile;  ///< absent when the curve is not concave
  std::optional<AngleFlowState> angle;
};

inline CustomInitial load_custom(const ExperimentConfig& cfg, std::size_t n) {
  const auto j = io::read_file(cfg.custom_path);
  CustomInitial out;
  auto check_angles = [&](const ContactAngles& a) {
    if (std::abs(a.psi_plus - cfg.angles.psi_plus) > 1e-12 || std::abs(a.psi_minus - cfg.angles.psi_minus) > 1e-12)
      throw ConfigError("custom initial data has different contact angles than the config");
  };
  try {
    if (j.contains("v")) {
      auto s = io::angle_state_from_json(j);
      check_angles(s.angles);
      AngleFlowState r = s;
      r.z = unit_grid(n);
      r.v.resize(n + 1);
      for (std::size_t k = 0; k <= n; ++k) r.v[k] = numerics::interpolate_cubic(s.z, s.v, r.z[k]);
      r.v.front() = cfg.angles.psi_minus;
      r.v.back() = -cfg.angles.psi_plus;
      out.angle = r;
      try {
        out.profile = project_endpoint(profile_from_angle_state(r, n));
        require_concave(*out.profile, cfg.tol.concavity_floor);
      } catch (const ConcavityError&) {
        out.profile.reset();
      }
    } else {
      auto p = io::profile_from_json(j);
      check_angles(p.angles);
      require_concave(p);
      out.profile = project_endpoint(resample(p, n));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("custom initial data: ") + e.what());
  }
  return out;
}

/// The initial curvature profile on the grid_n grid.
inline CurvatureProfile generate_initial(const ExperimentConfig& cfg, std::size_t n) {
  cfg.validate();
  switch (cfg.initial_kind) {
    case InitialKind::wave:
      return config_wave(cfg, n).profile;
    case InitialKind::arc:
      return CurvatureProfile::sample(cfg.angles, n,
                                      [&](double) { return -cfg.angles.total() / cfg.length_scale; });
    case InitialKind::perturbed_wave: {
      const auto w = config_wave(cfg, n);
      std::optional<PerturbedProfile> p;
      try {
        p = perturb_wave(w, cfg.epsilon, cfg.mode);
      } catch (const Error&) {
      }
      if (!p || *std::max_element(p->profile.kappa.begin(), p->profile.kappa.end()) >= -cfg.tol.concavity_floor) {
        const double emax = max_admissible_epsilon(w, cfg.mode, cfg.tol.concavity_floor, cfg.epsilon);
        throw ConfigError("epsilon=" + io::format_double(cfg.epsilon) +
                          " makes the initial curve non-concave; the largest admissible epsilon for mode " +
                          std::to_string(cfg.mode) + " is about " + io::format_double(emax));
      }
      return p->profile;
    }
    case InitialKind::custom_file: {
      auto c = load_custom(cfg, n);
      if (!c.profile) throw ConfigError("custom initial curve is not strictly concave; use `compare` for it");
      return *c.profile;
    }
  }
  throw ConfigError("unknown initial kind");
}

inline CurvatureProfile generate_initial(const ExperimentConfig& cfg) { return generate_initial(cfg, cfg.grid_n); }

// ---------------------------------------------------------------------------
// Single run

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_invariant = 4 };

struct RunSummary {
  std::string status = "ok";
  int exit_code = exit_ok;
  std::string message;
  double t_final = 0.0;
  std::size_t steps = 0;
  std::size_t records = 0;
  TravelingWave wave;
  MonitorStats stats;
  DiagnosticsRecord initial;
  DiagnosticsRecord last;
  ExponentialFit fit;
  double shift_spread_last10 = 0.0;
  double holder_gap_ratio = 0.0;  ///< gap(final) / gap(initial)
  std::vector<std::string> violations;
  std::vector<std::pair<double, bool>> simplicity_timeline;  ///< (t, flag) at every change
};

inline io::json to_json(const DiagnosticsRecord& r) {
  return io::json{{"t", r.t},
                  {"L", r.L},
                  {"A", r.A},
                  {"E", r.E},
                  {"F1", r.F1},
                  {"F2", r.F2},
                  {"F_tilde", r.F_tilde},
                  {"holder_gap", r.holder_gap},
                  {"sup_kappa", r.sup_kappa},
                  {"inf_kappa", r.inf_kappa},
                  {"max_abs_kappa_theta", r.max_abs_kappa_theta},
                  {"kappa_dist_to_wave", r.kappa_dist_to_wave},
                  {"hausdorff_to_wave", r.hausdorff_to_wave},
                  {"shift_to_wave", r.shift_to_wave},
                  {"simplicity_flag", r.simplicity_flag}};
}

inline io::json to_json(const RunSummary& s) {
  io::json timeline = io::json::array();
  for (const auto& [t, f] : s.simplicity_timeline) timeline.push_back({t, f});
  return io::json{
      {"status", s.status},
      {"exit_code", s.exit_code},
      {"message", s.message},
      {"t_final", s.t_final},
      {"steps", s.steps},
      {"records", s.records},
      {"wave", {{"c", s.wave.c}, {"length", s.wave.length}, {"area", s.wave.area}}},
      {"kappa_dist_to_wave_initial", s.initial.kappa_dist_to_wave},
      {"kappa_dist_to_wave_final", s.last.kappa_dist_to_wave},
      {"hausdorff_to_wave_final", s.last.hausdorff_to_wave},
      {"shift_to_wave_final", s.last.shift_to_wave},
      {"shift_spread_last10", s.shift_spread_last10},
      {"fit", {{"slope", s.fit.slope}, {"intercept", s.fit.intercept}, {"r2", s.fit.r2}, {"samples", s.fit.samples}}},
      {"holder_gap_initial", s.initial.holder_gap},
      {"holder_gap_final", s.last.holder_gap},
      {"holder_gap_ratio", s.holder_gap_ratio},
      {"invariants",
       {{"A0", s.stats.A0},
        {"max_rel_area_drift", s.stats.max_rel_area_drift},
        {"min_isoperimetric_margin", s.stats.min_isoperimetric_margin},
        {"max_energy_increase", s.stats.max_energy_increase},
        {"total_energy_increase", s.stats.total_energy_increase},
        {"max_F_tilde_decrease", s.stats.max_F_tilde_decrease},
        {"total_F_tilde_decrease", s.stats.total_F_tilde_decrease},
        {"max_dissipation_defect", s.stats.max_dissipation_defect},
        {"min_holder_gap_raw", s.stats.min_holder_gap_raw},
        {"max_abs_kappa_theta", s.stats.max_abs_kappa_theta},
        {"max_sup_kappa", s.stats.max_sup_kappa},
        {"area_flags", s.stats.area_flags},
        {"simplicity_lost", s.stats.simplicity_lost}}},
      {"violations", s.violations},
      {"simplicity_timeline", timeline}};
}

struct RunOptions {
  bool write_files = true;
  /// Called for every record, after it is written.
  std::function<void(const DiagnosticsRecord&)> on_record;
};

namespace detail {

inline void finish_summary(RunSummary& s, const Monitor& mon, const Tolerances& tol) {
  const auto& recs = mon.records();
  s.stats = mon.stats();
  s.records = recs.size();
  if (recs.empty()) return;
  s.initial = recs.front();
  s.last = recs.back();
  std::vector<double> t, d;
  for (const auto& r : recs) {
    t.push_back(r.t);
    d.push_back(r.kappa_dist_to_wave);
  }
  s.fit = fit_exponential_tail(t, d);
  const std::size_t k = std::min<std::size_t>(10, recs.size());
  double lo = recs.back().shift_to_wave, hi = lo;
  for (std::size_t i = recs.size() - k; i < recs.size(); ++i) {
    lo = std::min(lo, recs[i].shift_to_wave);
    hi = std::max(hi, recs[i].shift_to_wave);
  }
  s.shift_spread_last10 = hi - lo;
  s.holder_gap_ratio = s.initial.holder_gap > 0.0 ? s.last.holder_gap / s.initial.holder_gap : 0.0;
  bool flag = recs.front().simplicity_flag;
  s.simplicity_timeline.push_back({recs.front().t, flag});
  for (const auto& r : recs)
    if (r.simplicity_flag != flag) {
      flag = r.simplicity_flag;
      s.simplicity_timeline.push_back({r.t, flag});
    }

  const auto& st = s.stats;
  if (st.max_rel_area_drift > tol.area_rel)
    s.violations.push_back("area drift " + io::format_double(st.max_rel_area_drift));
  if (st.min_isoperimetric_margin < -tol.isoperimetric)
    s.violations.push_back("isoperimetric margin " + io::format_double(st.min_isoperimetric_margin));
  if (st.max_energy_increase > tol.monotonicity)
    s.violations.push_back("energy increase " + io::format_double(st.max_energy_increase));
  if (st.max_F_tilde_decrease > tol.monotonicity)
    s.violations.push_back("F_tilde decrease " + io::format_double(st.max_F_tilde_decrease));
  if (st.min_holder_gap_raw < -tol.holder)
    s.violations.push_back("negative Hoelder gap " + io::format_double(st.min_holder_gap_raw));
}

}  // namespace detail

/// Evolve the config's initial data with the angle-parameterized solver,
/// monitoring against the wave of the same area. Writes (under output_dir)
/// config.json, wave.json, diagnostics.csv, snapshots/*.json and
/// summary.json. Config problems throw ConfigError; solver failures and
/// invariant violations are reported in the summary.
inline RunSummary run(const ExperimentConfig& cfg, const RunOptions& ro = {}) {
  cfg.validate();
  const std::size_t n = cfg.grid_n;
  const CurvatureProfile k0 = generate_initial(cfg, n);
  RunSummary sum;
  sum.wave = scale_to_area(unit_wave(cfg.angles, n), signed_area(k0));

  const std::filesystem::path dir(cfg.output_dir);
  std::optional<io::CsvWriter> csv;
  if (ro.write_files) {
    std::filesystem::create_directories(dir / "snapshots");
    io::write_file(dir / "config.json", to_json(cfg));
    io::write_file(dir / "wave.json", io::to_json(sum.wave));
    csv.emplace(dir / "diagnostics.csv");
  }

  MonitorOptions mo;
  mo.track_hausdorff = cfg.track_hausdorff;
  mo.area_tolerance = cfg.tol.area_rel;
  Monitor mon(sum.wave, mo);
  std::size_t snap_index = 0;
  auto write_snapshot = [&](const ThetaFlowState& s, const std::string& file) {
    if (ro.write_files) io::write_file(dir / "snapshots" / file, io::snapshot_json(s.t, s.profile, s.x_left));
  };

  EvolveOptions eo;
  eo.flow.safety = cfg.safety_factor;
  eo.flow.concavity_floor = cfg.tol.concavity_floor;
  eo.stride = cfg.snapshot_stride;
  eo.keep_snapshots = false;
  eo.on_snapshot = [&](const ThetaFlowState& s) {
    const auto& r = mon.observe(s.t, s.profile, s.x_left);
    if (csv) csv->write(r);
    if (ro.on_record) ro.on_record(r);
    const bool last = s.t >= cfg.t_end;
    if (snap_index % cfg.snapshot_every == 0 || last) {
      char name[32];
      std::snprintf(name, sizeof name, "snap_%06zu.json", snap_index);
      write_snapshot(s, name);
    }
    ++snap_index;
    sum.steps = s.step_count;
  };

  ThetaFlowState s0{k0, 0.0, 0.0, 0};
  try {
    evolve(s0, cfg.t_end, eo);
    sum.t_final = cfg.t_end;
  } catch (const FlowFailure& f) {
    sum.status = "solver_failure";
    sum.exit_code = exit_solver;
    sum.message = f.what();
    sum.t_final = f.last_good().t;
    sum.steps = f.last_good().step_count;
    write_snapshot(f.last_good(), "last_good.json");
  }
  if (csv) csv->flush();
  detail::finish_summary(sum, mon, cfg.tol);
  if (sum.exit_code == exit_ok && !sum.violations.empty()) {
    sum.status = "invariant_violation";
    sum.exit_code = exit_invariant;
    sum.message = sum.violations.front();
  }
  if (ro.write_files) io::write_file(dir / "summary.json", to_json(sum));
  return sum;
}

// ---------------------------------------------------------------------------
// Two-solver comparison

struct CompareLevel {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<double> gaps;     ///< Hausdorff distance between the two reconstructions
  double max_gap = 0.0;
  bool theta_ran = true;        ///< false when the angle-parameterized solver refused or failed
  std::string theta_note;
  double v_range_violation = 0.0;  ///< how far v left [-psi_plus, psi_minus]
  double eta_final = 0.0;
};

struct CompareReport {
  bool partial = false;
  CompareLevel coarse, fine;
  std::optional<double> ratio;  ///< coarse.max_gap / fine.max_gap
};

inline CompareLevel compare_level(const ExperimentConfig& cfg, std::size_t n) {
  CompareLevel lv;
  lv.n = n;
  std::optional<CurvatureProfile> k0;
  AngleFlowState a0;
  if (cfg.initial_kind == InitialKind::custom_file) {
    auto c = load_custom(cfg, n);
    k0 = c.profile;
    a0 = c.angle ? *c.angle : angle_state_from_profile(*k0, 0.0, n);
  } else if (cfg.initial_kind == InitialKind::wave) {
    const auto w = config_wave(cfg, n);
    k0 = w.profile;
    a0 = angle_state_from_wave(w, n);
  } else {
    k0 = generate_initial(cfg, n);
    a0 = angle_state_from_profile(*k0, 0.0, n);
  }
  a0.x_left = 0.0;
  a0.t = 0.0;
  a0.tau = 0.0;

  std::optional<ThetaFlowState> th;
  if (k0) {
    th = ThetaFlowState{*k0, 0.0, 0.0, 0};
  } else {
    lv.theta_ran = false;
    lv.theta_note = "initial curve is not strictly concave; angle-parameterized solver not run";
  }
  EvolveOptions eo;
  eo.flow.safety = cfg.safety_factor;
  eo.flow.concavity_floor = cfg.tol.concavity_floor;
  eo.keep_snapshots = false;
  eo.stride = static_cast<std::size_t>(-1);
  AngleEvolveOptions ao;
  ao.flow.safety = cfg.safety_factor;
  ao.keep_snapshots = false;
  ao.stride = static_cast<std::size_t>(-1);

  AngleFlowState a = a0;
  auto v_violation = [&](const AngleFlowState& s) {
    double worst = 0.0;
    for (double v : s.v) worst = std::max({worst, v - s.angles.psi_minus, -s.angles.psi_plus - v});
    return worst;
  };
  lv.v_range_violation = v_violation(a);
  for (std::size_t k = 1; k <= cfg.compare_samples; ++k) {
    const double tk = cfg.t_end * static_cast<double>(k) / static_cast<double>(cfg.compare_samples);
    ao.on_snapshot = [&](const AngleFlowState& s) { a = s; };
    evolve_angle(a, tk, ao);
    lv.v_range_violation = std::max(lv.v_range_violation, v_violation(a));
    if (th) {
      try {
        eo.on_snapshot = [&](const ThetaFlowState& s) { *th = s; };
        evolve(*th, tk, eo);
      } catch (const FlowFailure& f) {
        th.reset();
        lv.theta_ran = false;
        lv.theta_note = f.what();
      }
    }
    lv.times.push_back(tk);
    if (th) {
      const double g = hausdorff_distance(reconstruct_curve(th->profile, th->x_left), reconstruct_from_angle(a));
      lv.gaps.push_back(g);
      lv.max_gap = std::max(lv.max_gap, g);
    } else {
      lv.gaps.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  lv.eta_final = a.eta;
  return lv;
}

/// Runs both solvers from the same initial curve at grid_n and 2 grid_n and
/// reports the largest Hausdorff distance between their reconstructions over
/// compare_samples equally spaced times.
inline CompareReport compare(const ExperimentConfig& cfg) {
  cfg.validate();
  CompareReport r;
  r.coarse = compare_level(cfg, cfg.grid_n);
  r.fine = compare_level(cfg, 2 * cfg.grid_n);
  r.partial = !r.coarse.theta_ran || !r.fine.theta_ran;
  if (!r.partial && r.fine.max_gap > 0.0) r.ratio = r.coarse.max_gap / r.fine.max_gap;
  return r;
}

inline io::json to_json(const CompareLevel& lv) {
  return io::json{{"n", lv.n},
                  {"times", lv.times},
                  {"gaps", lv.gaps},
                  {"max_gap", lv.theta_ran ? io::json(lv.max_gap) : io::json(nullptr)},
                  {"theta_solver_ran", lv.theta_ran},
                  {"theta_solver_note", lv.theta_note},
                  {"v_range_violation", lv.v_range_violation},
                  {"eta_final", lv.eta_final}};
}

inline io::json to_json(const CompareReport& r) {
  return io::json{{"partial", r.partial},
                  {"coarse", to_json(r.coarse)},
                  {"fine", to_json(r.fine)},
                  {"refinement_ratio", r.ratio ? io::json(*r.ratio) : io::json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepEntry {
  std::string name;
  std::string output_dir;
  int exit_code = exit_ok;
  std::string status;
  std::string error;
  std::optional<RunSummary> summary;
};

/// Worker count: hardware concurrency, capped by GEOFLOW_THREADS when set to
/// a positive integer, and by the number of jobs.
inline std::size_t sweep_threads(std::size_t jobs) {
  std::size_t t = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GEOFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) t = std::min(t, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(t, jobs));
}

/// Parse a sweep file: {"defaults": {...}, "runs": [{...}, ...]} where each
/// run is merged over the defaults. A bare array of configs also works.
inline std::vector<ExperimentConfig> load_sweep(const std::filesystem::path& path, const std::string& out_root) {
  const auto j = io::read_file(path);
  io::json defaults = io::json::object(), runs;
  if (j.is_array()) {
    runs = j;
  } else {
    detail::reject_unknown(j, {"defaults", "runs"}, "sweep file");
    if (j.contains("defaults")) defaults = j.at("defaults");
    if (!j.contains("runs") || !j.at("runs").is_array()) throw ConfigError("sweep file needs a 'runs' array");
    runs = j.at("runs");
  }
  std::vector<ExperimentConfig> out;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    io::json merged = defaults;
    merged.merge_patch(runs[k]);
    auto c = config_from_json(merged, path.parent_path());
    if (c.name.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "run_%03zu", k);
      c.name = buf;
    }
    c.output_dir = (std::filesystem::path(out_root) / c.name).string();
    out.push_back(std::move(c));
  }
  return out;
}

/// Runs every config on a pool of sweep_threads workers. Each run owns its
/// output directory; errors are recorded per entry.
inline std::vector<SweepEntry> sweep(const std::vector<ExperimentConfig>& configs, std::size_t threads) {
  std::vector<SweepEntry> entries(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      auto& e = entries[k];
      e.name = configs[k].name;
      e.output_dir = configs[k].output_dir;
      try {
        e.summary = run(configs[k]);
        e.exit_code = e.summary->exit_code;
        e.status = e.summary->status;
      } catch (const ConfigError& ex) {
        e.exit_code = exit_config;
        e.status = "config_error";
        e.error = ex.what();
      } catch (const std::exception& ex) {
        e.exit_code = exit_solver;
        e.status = "solver_failure";
        e.error = ex.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return entries;
}

inline io::json sweep_index(const std::vector<SweepEntry>& entries) {
  io::json runs = io::json::array();
  for (const auto& e : entries) {
    io::json j{{"name", e.name}, {"output_dir", e.output_dir}, {"status", e.status}, {"exit_code", e.exit_code}};
    if (!e.error.empty()) j["error"] = e.error;
    if (e.summary) {
      j["c"] = e.summary->wave.c;
      j["summary"] = to_json(*e.summary);
    }
    runs.push_back(j);
  }
  return io::json{{"runs", runs}};
}

// ---------------------------------------------------------------------------
// Snapshot checks

struct CheckItem {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct CheckReport {
  std::string kind;  ///< "profile" or "angle_state"
  std::vector<CheckItem> items;
  bool passed() const {
    return std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.passed; });
  }
};

/// Invariant suite for one snapshot document: a curvature snapshot (with
/// "kappa", optionally the reconstructed "x"/"y") or an angle state ("v").
inline CheckReport check_snapshot(const io::json& j, const Tolerances& tol = {}) {
  CheckReport rep;
  auto add = [&](std::string name, double value, double t, bool ok) { rep.items.push_back({std::move(name), value, t, ok}); };
  if (j.contains("v")) {
    rep.kind = "angle_state";
    const auto s = io::angle_state_from_json(j);
    try {
      s.angles.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    const double pin = std::max(std::abs(s.v.front() - s.angles.psi_minus), std::abs(s.v.back() + s.angles.psi_plus));
    add("dirichlet_pins", pin, 0.0, pin == 0.0);
    double range = 0.0;
    for (double v : s.v) range = std::max({range, v - s.angles.psi_minus, -s.angles.psi_plus - v});
    add("v_within_contact_angles", range, 1e-12, range <= 1e-12);
    add("eta_finite", s.eta, 0.0, std::isfinite(s.eta));
    const auto c = reconstruct_from_angle(s);
    const double yend = std::abs(c.points.back().y) / std::max(1.0, s.length());
    add("right_endpoint_on_axis", yend, 1e-6, yend <= 1e-6);
    return rep;
  }
  rep.kind = "profile";
  const auto p = io::profile_from_json(j);
  try {
    p.angles.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  const double kmax = *std::max_element(p.kappa.begin(), p.kappa.end());
  add("concavity", kmax, -tol.concavity_floor, kmax < -tol.concavity_floor);
  if (kmax >= 0.0) return rep;
  const double L = length_of(p);
  const double res = std::abs(endpoint_residual(p)) / L;
  add("endpoint_residual", res, tol.boundary, res <= tol.boundary);
  const double A = signed_area(p);
  const double iso = L - std::sqrt(2.0 * std::numbers::pi * A);
  add("isoperimetric", iso, -tol.isoperimetric, iso >= -tol.isoperimetric);
  const auto gap = holder_gap(p, interior_rhs(p));
  add("holder_gap_nonnegative", gap.raw, -tol.holder, gap.raw >= -tol.holder);
  if (j.contains("x") && j.contains("y")) {
    const auto c = io::curve_from_json(j);
    const double d = hausdorff_distance(c, reconstruct_curve(p, c.x_left)) / L;
    add("curve_matches_profile", d, 1e-12, d <= 1e-12);
  }
  return rep;
}

inline io::json to_json(const CheckReport& r) {
  io::json items = io::json::array();
  for (const auto& i : r.items)
    items.push_back({{"name", i.name}, {"value", i.value}, {"tolerance", i.tolerance}, {"passed", i.passed}});
  return io::json{{"kind", r.kind}, {"passed", r.passed()}, {"checks", items}};
}

}  // namespace geoflow
