#pragma once

// Monitored functionals along a flow: energy, area, the Lyapunov functional
// F~ and its Hoelder-gap derivative, stationarity and support-function
// identities, curvature bounds, and distance to the matched traveling wave.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "geoflow/contact_angles.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/numerics.hpp"
#include "geoflow/theta_flow.hpp"
#include "geoflow/traveling_wave.hpp"

namespace geoflow {

// ---------------------------------------------------------------------------
// Energy

/// E = L - x_right cos(psi_plus) + x_left cos(psi_minus) for a polyline.
inline double energy(const PlanarCurve& c) {
  if (c.points.size() < 2) throw DomainError("energy needs at least two points");
  return curve_length(c) - c.points.back().x * std::cos(c.angles.psi_plus) +
         c.points.front().x * std::cos(c.angles.psi_minus);
}

/// Same functional evaluated from the curvature profile (quadrature instead
/// of chord lengths).
inline double energy(const CurvatureProfile& p, double x_left) {
  auto f = detail::over_kappa(p, [](double th) { return std::cos(th); });
  const double x_right = x_left - numerics::simpson(f, p.spacing());
  return length_of(p) - x_right * std::cos(p.angles.psi_plus) +
         x_left * std::cos(p.angles.psi_minus);
}

/// int (kappa + K/L)^2 ds: the rate at which E decreases.
inline double energy_dissipation(const CurvatureProfile& p) {
  const double KL = p.angles.total() / length_of(p);
  std::vector<double> f(p.kappa.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = p.kappa[i] + KL;
    f[i] = -v * v / p.kappa[i];
  }
  return numerics::simpson(f, p.spacing());
}

// ---------------------------------------------------------------------------
// Lyapunov functional

struct LyapunovValues {
  double F1 = 0.0;
  double F2 = 0.0;
  double F_tilde = 0.0;
  /// L^2 exp(-2 int log(-kappa) / K): the factor turning F into F~.
  double weight = 0.0;
};

/// L^2 exp(-2/K int log(-kappa) dtheta).
inline double lyapunov_weight(const CurvatureProfile& p) {
  std::vector<double> f(p.kappa.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::log(-p.kappa[i]);
  const double L = length_of(p);
  return L * L * std::exp(-2.0 * numerics::simpson(f, p.spacing()) / p.angles.total());
}

inline LyapunovValues lyapunov(const CurvatureProfile& p) {
  require_concave(p);
  const double K = p.angles.total();
  const double L = length_of(p);
  const double KL = K / L;
  const numerics::TrigStencils st(p.spacing());
  const auto& k = p.kappa;
  const auto dk = st.first_derivative(k);
  std::vector<double> f(k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    f[i] = -0.5 * dk[i] * dk[i] + 0.5 * k[i] * k[i] + k[i] * KL;
  const double cm = cot_angle(p.angles.psi_minus), cp = cot_angle(p.angles.psi_plus);
  LyapunovValues out;
  out.F1 = numerics::simpson(f, p.spacing()) + cm * (0.5 * k.back() * k.back() + k.back() * KL) +
           cp * (0.5 * k.front() * k.front() + k.front() * KL);
  out.F2 = K * K / (2.0 * L * L) * (K + cm + cp);
  out.weight = lyapunov_weight(p);
  out.F_tilde = out.weight * (out.F1 + out.F2);
  return out;
}

struct HolderGap {
  double value = 0.0;  ///< clamped at zero when within rounding of it
  double raw = 0.0;
};

/// int kappa_t^2/kappa^2 - (1/K)(int kappa_t/kappa)^2, nonnegative by
/// Cauchy-Schwarz (Simpson weights are positive and sum to K, so this also
/// holds for the discrete sums).
inline HolderGap holder_gap(const CurvatureProfile& p, std::span<const double> kappa_t) {
  if (kappa_t.size() != p.kappa.size()) throw DomainError("kappa_t has the wrong size");
  std::vector<double> r(p.kappa.size()), r2(p.kappa.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = kappa_t[i] / p.kappa[i];
    r2[i] = r[i] * r[i];
  }
  const double h = p.spacing();
  const double a = numerics::simpson(r2, h);
  const double b = numerics::simpson(r, h);
  HolderGap g;
  g.raw = a - b * b / p.angles.total();
  g.value = (g.raw < 0.0 && g.raw >= -1e-14) ? 0.0 : g.raw;
  return g;
}

/// |dF~/dt - weight * gap|, the defect in the derivative identity of F~.
inline double lyapunov_identity_residual(const CurvatureProfile& p, std::span<const double> kappa_t,
                                         double dF_tilde_dt) {
  return std::abs(dF_tilde_dt - lyapunov_weight(p) * holder_gap(p, kappa_t).value);
}

// ---------------------------------------------------------------------------
// Stationarity and support function

struct StationarityResult {
  double alpha_hat = 0.0;
  double residual = 0.0;
};

/// Least-squares alpha in alpha*kappa ~ kappa^2 (kappa_thth + kappa + K/L) and
/// the sup-norm misfit. Both vanish on traveling waves.
inline StationarityResult stationarity_residual(const CurvatureProfile& p) {
  const auto r = interior_rhs(p);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    num += r[i] * p.kappa[i];
    den += p.kappa[i] * p.kappa[i];
  }
  StationarityResult out;
  out.alpha_hat = num / den;
  for (std::size_t i = 0; i < r.size(); ++i)
    out.residual = std::max(out.residual, std::abs(r[i] - out.alpha_hat * p.kappa[i]));
  return out;
}

struct SupportProfile {
  std::vector<double> grid;
  std::vector<double> s_values;
};

/// S(theta) = sin(theta) int_theta^{psi_minus} cos/kappa - cos(theta) int_theta^{psi_minus} sin/kappa.
inline SupportProfile support_function(const CurvatureProfile& p) {
  require_concave(p);
  auto tails = detail::tail_integrals(p);
  SupportProfile s{p.grid, std::vector<double>(p.grid.size())};
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    s.s_values[i] = std::sin(p.grid[i]) * tails.cos_part[i] - std::cos(p.grid[i]) * tails.sin_part[i];
  return s;
}

/// max over interior nodes of |D2 S + S + 1/kappa| with the plain three-point D2.
inline double support_identity_residual(const CurvatureProfile& p) {
  const auto s = support_function(p);
  const double h = p.spacing();
  const auto& v = s.s_values;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
    worst = std::max(worst, std::abs(d2 + v[i] + 1.0 / p.kappa[i]));
  }
  return worst;
}

/// 1/2 int (-S / kappa) dtheta.
inline double area_from_support(const CurvatureProfile& p) {
  const auto s = support_function(p);
  std::vector<double> f(p.kappa.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = -s.s_values[i] / p.kappa[i];
  return 0.5 * numerics::simpson(f, p.spacing());
}

// ---------------------------------------------------------------------------
// Records and monitor

struct DiagnosticsRecord {
  double t = 0.0;
  double L = 0.0;
  double A = 0.0;
  double E = 0.0;
  double F1 = 0.0;
  double F2 = 0.0;
  double F_tilde = 0.0;
  double holder_gap = 0.0;
  double holder_gap_raw = 0.0;
  double sup_kappa = 0.0;
  double inf_kappa = 0.0;
  double max_abs_kappa_theta = 0.0;
  double kappa_dist_to_wave = 0.0;
  double hausdorff_to_wave = 0.0;
  double shift_to_wave = 0.0;
  bool simplicity_flag = true;
  /// Not part of the CSV: relative area drift exceeded the monitor tolerance.
  bool area_flag = false;
  double x_left = 0.0;
  double F_weight = 0.0;
  double dissipation = 0.0;
};

/// Running extrema and worst violations seen by a Monitor.
struct MonitorStats {
  std::size_t records = 0;
  double A0 = 0.0;
  double max_rel_area_drift = 0.0;
  double min_isoperimetric_margin = std::numeric_limits<double>::infinity();  ///< min L - sqrt(2 pi A0)
  double max_energy_increase = 0.0;       ///< worst E(t_k) - E(t_{k-1}) > 0
  double total_energy_increase = 0.0;
  double max_F_tilde_decrease = 0.0;      ///< worst, normalized by the F~ scale
  double total_F_tilde_decrease = 0.0;
  double max_dissipation_defect = 0.0;    ///< |dE/dt + int (kappa+K/L)^2 ds|, relative
  double min_holder_gap_raw = std::numeric_limits<double>::infinity();
  double max_abs_kappa_theta = 0.0;       ///< running M1
  double max_sup_kappa = -std::numeric_limits<double>::infinity();  ///< running -M2
  std::size_t area_flags = 0;
  bool simplicity_lost = false;
};

struct MonitorOptions {
  bool track_hausdorff = true;
  double area_tolerance = 1e-6;
};

/// Turns trajectory snapshots (in time order) into DiagnosticsRecords.
///
/// The reference wave should already be scaled to the initial area; the wave
/// curve at time t is wave_at(wave, t, x_left of the first snapshot).
class Monitor {
 public:
  Monitor(TravelingWave wave, MonitorOptions opt = {}) : wave_(std::move(wave)), opt_(opt) {}

  const DiagnosticsRecord& observe(double t, const CurvatureProfile& p, double x_left) {
    if (p.kappa.size() != wave_.profile.kappa.size())
      throw DomainError("monitor: profile and wave grids differ");
    DiagnosticsRecord r;
    r.t = t;
    r.x_left = x_left;
    r.L = length_of(p);
    r.A = signed_area(p);
    r.E = energy(p, x_left);
    const auto lv = lyapunov(p);
    r.F1 = lv.F1;
    r.F2 = lv.F2;
    r.F_tilde = lv.F_tilde;
    r.F_weight = lv.weight;
    const auto kt = interior_rhs(p);
    const auto gap = holder_gap(p, kt);
    r.holder_gap = gap.value;
    r.holder_gap_raw = gap.raw;
    r.sup_kappa = *std::max_element(p.kappa.begin(), p.kappa.end());
    r.inf_kappa = *std::min_element(p.kappa.begin(), p.kappa.end());
    const numerics::TrigStencils st(p.spacing());
    for (double d : st.first_derivative(p.kappa))
      r.max_abs_kappa_theta = std::max(r.max_abs_kappa_theta, std::abs(d));
    for (std::size_t i = 0; i < p.kappa.size(); ++i)
      r.kappa_dist_to_wave = std::max(r.kappa_dist_to_wave, std::abs(p.kappa[i] - wave_.profile.kappa[i]));
    const PlanarCurve curve = reconstruct_curve(p, x_left);
    if (!wave_x0_) wave_x0_ = x_left;
    if (opt_.track_hausdorff) {
      std::optional<double> hint;
      if (!records_.empty()) hint = records_.back().shift_to_wave;
      const auto al = hausdorff_mod_translation(curve, wave_at(wave_, t, *wave_x0_), 1e-10, hint);
      r.hausdorff_to_wave = al.distance;
      r.shift_to_wave = al.shift;
    }
    r.simplicity_flag = curve.points.back().x > curve.points.front().x;
    r.dissipation = energy_dissipation(p);

    update_stats(r);
    records_.push_back(r);
    return records_.back();
  }

  const std::vector<DiagnosticsRecord>& records() const noexcept { return records_; }
  const MonitorStats& stats() const noexcept { return stats_; }
  const TravelingWave& wave() const noexcept { return wave_; }

 private:
  void update_stats(DiagnosticsRecord& r) {
    auto& s = stats_;
    if (s.records == 0) s.A0 = r.A;
    const double drift = std::abs(r.A - s.A0) / std::abs(s.A0);
    s.max_rel_area_drift = std::max(s.max_rel_area_drift, drift);
    if (drift > opt_.area_tolerance) {
      r.area_flag = true;
      ++s.area_flags;
    }
    s.min_isoperimetric_margin =
        std::min(s.min_isoperimetric_margin, r.L - std::sqrt(2.0 * std::numbers::pi * s.A0));
    s.min_holder_gap_raw = std::min(s.min_holder_gap_raw, r.holder_gap_raw);
    s.max_abs_kappa_theta = std::max(s.max_abs_kappa_theta, r.max_abs_kappa_theta);
    s.max_sup_kappa = std::max(s.max_sup_kappa, r.sup_kappa);
    if (!r.simplicity_flag) s.simplicity_lost = true;
    if (!records_.empty()) {
      const auto& prev = records_.back();
      const double dE = r.E - prev.E;
      if (dE > 0.0) {
        s.max_energy_increase = std::max(s.max_energy_increase, dE);
        s.total_energy_increase += dE;
      }
      // F~ vanishes on every traveling wave, so its decrements are measured
      // against the size of the two parts that cancel there.
      const double scale = std::max(r.F_weight * (std::abs(r.F1) + std::abs(r.F2)), 1e-300);
      const double dF = (prev.F_tilde - r.F_tilde) / scale;
      if (dF > 0.0) {
        s.max_F_tilde_decrease = std::max(s.max_F_tilde_decrease, dF);
        s.total_F_tilde_decrease += dF;
      }
      const double dt = r.t - prev.t;
      if (dt > 0.0) {
        const double rate = dE / dt;
        const double expected = -0.5 * (r.dissipation + prev.dissipation);
        const double scale_e = std::max(std::abs(expected), 1e-300);
        s.max_dissipation_defect = std::max(s.max_dissipation_defect, std::abs(rate - expected) / scale_e);
      }
    }
    ++s.records;
  }

  TravelingWave wave_;
  MonitorOptions opt_;
  std::optional<double> wave_x0_;
  std::vector<DiagnosticsRecord> records_;
  MonitorStats stats_;
};

/// Records for every snapshot of a stored trajectory.
inline std::vector<DiagnosticsRecord> monitor(const std::vector<ThetaSnapshot>& trajectory,
                                              const TravelingWave& wave, MonitorOptions opt = {}) {
  Monitor m(wave, opt);
  for (const auto& s : trajectory) m.observe(s.t, s.profile, s.x_left);
  return m.records();
}

struct ExponentialFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t samples = 0;
};

/// Least-squares line through (t, log y) over the final `tail` fraction of
/// the samples; nonpositive y are skipped.
inline ExponentialFit fit_exponential_tail(std::span<const double> t, std::span<const double> y,
                                           double tail = 0.5) {
  const std::size_t m = t.size();
  const std::size_t first = m - static_cast<std::size_t>(std::ceil(tail * static_cast<double>(m)));
  std::vector<double> xs, ys;
  for (std::size_t i = first; i < m; ++i) {
    if (y[i] > 0.0 && std::isfinite(y[i])) {
      xs.push_back(t[i]);
      ys.push_back(std::log(y[i]));
    }
  }
  ExponentialFit f;
  f.samples = xs.size();
  if (xs.size() < 3) return f;
  const double nx = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace geoflow
