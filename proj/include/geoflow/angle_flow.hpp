#pragma once

// The flow written for the tangent angle v as a function of normalized arc
// length z in [0, 1] (z = 0 is the left endpoint), with eta = log L and the
// rescaled time tau (dt = e^{2 eta} dtau):
//
//   v_tau = v_zz + (P(z) + Q z) v_z,      v(0) = psi_minus,  v(1) = -psi_plus,
//   eta'  = Q,
//   P(z) = K (v - psi_minus) - cot(psi_minus) (v_z(0) + K) + int_0^z v_z^2,
//   Q    = cot(psi_plus) (v_z(1) + K) + cot(psi_minus) (v_z(0) + K) + K^2 - int_0^1 v_z^2.
//
// This formulation does not need the curve to be concave; it serves as an
// independent check of the angle-parameterized solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/contact_angles.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/numerics.hpp"
#include "geoflow/traveling_wave.hpp"

namespace geoflow {

struct AngleFlowState {
  ContactAngles angles;
  std::vector<double> z;
  std::vector<double> v;
  double eta = 0.0;
  double tau = 0.0;
  double t = 0.0;
  double x_left = 0.0;

  std::size_t intervals() const noexcept { return z.size() - 1; }
  double spacing() const noexcept { return 1.0 / static_cast<double>(intervals()); }
  double length() const { return std::exp(eta); }
};

struct CoefficientSlice {
  std::vector<double> p_values;
  double q_value = 0.0;
};

inline std::vector<double> unit_grid(std::size_t m) {
  if (m < 16 || m % 2 != 0) throw DomainError("z grid needs an even number of intervals >= 16");
  std::vector<double> z(m + 1);
  for (std::size_t j = 0; j <= m; ++j) z[j] = static_cast<double>(j) / static_cast<double>(m);
  z[m] = 1.0;
  return z;
}

/// P on every node and Q. v_z is taken from fourth-order differences and the
/// running integral of v_z^2 from the cumulative Simpson rule.
inline CoefficientSlice coefficients(const AngleFlowState& s) {
  const double h = s.spacing();
  const double K = s.angles.total();
  const double pm = s.angles.psi_minus;
  const double cm = cot_angle(s.angles.psi_minus), cp = cot_angle(s.angles.psi_plus);
  const auto vz = numerics::first_derivative_4th(s.v, h);
  std::vector<double> vz2(vz.size());
  for (std::size_t j = 0; j < vz.size(); ++j) vz2[j] = vz[j] * vz[j];
  const auto I = numerics::cumulative_from_left(vz2, h);
  const double vz0 = vz.front(), vz1 = vz.back();
  CoefficientSlice c;
  c.p_values.resize(s.v.size());
  for (std::size_t j = 0; j < s.v.size(); ++j)
    c.p_values[j] = K * (s.v[j] - pm) - cm * (vz0 + K) + I[j];
  c.q_value = cp * (vz1 + K) + cm * (vz0 + K) + K * K - I.back();
  return c;
}

/// Physical time as a function of tau for piecewise-linear eta(tau): both
/// directions are integrated exactly on each piece, so converting back and
/// forth is exact up to rounding.
class TimeMap {
 public:
  TimeMap() = default;
  TimeMap(double tau0, double eta0, double t0) { knots_.push_back({tau0, eta0, t0}); }

  /// Append the next knot; returns the physical time reached.
  double extend(double tau, double eta) {
    const Knot& a = knots_.back();
    const double t = a.t + piece(a.tau, a.eta, tau, eta, tau);
    knots_.push_back({tau, eta, t});
    return t;
  }

  double t_of_tau(double tau) const {
    const std::size_t k = locate(tau, [](const Knot& q) { return q.tau; });
    const Knot& a = knots_[k];
    if (k + 1 == knots_.size()) return a.t;
    const Knot& b = knots_[k + 1];
    const double eta = a.eta + (b.eta - a.eta) * (tau - a.tau) / (b.tau - a.tau);
    return a.t + piece(a.tau, a.eta, tau, eta, tau);
  }

  double tau_of_t(double t) const {
    const std::size_t k = locate(t, [](const Knot& q) { return q.t; });
    const Knot& a = knots_[k];
    if (k + 1 == knots_.size()) return a.tau;
    const Knot& b = knots_[k + 1];
    // Invert t - a.t = int_{a.tau}^{tau} e^{2 eta}: closed form for linear eta.
    const double dt = t - a.t;
    const double slope = (b.eta - a.eta) / (b.tau - a.tau);
    const double e = std::exp(2.0 * a.eta);
    if (std::abs(slope) * (b.tau - a.tau) < 1e-12) return a.tau + dt / e;
    return a.tau + std::log1p(2.0 * slope * dt / e) / (2.0 * slope);
  }

  std::size_t size() const noexcept { return knots_.size(); }

 private:
  struct Knot {
    double tau, eta, t;
  };

  // int_{tau_a}^{tau} exp(2 eta) for eta linear from (tau_a, eta_a) to (tau_b, eta_b).
  static double piece(double tau_a, double eta_a, double tau_b, double eta_b, double tau) {
    const double d = tau - tau_a;
    if (d == 0.0) return 0.0;
    const double slope = (eta_b - eta_a) / (tau_b - tau_a);
    const double x = 2.0 * slope * d;
    const double e = std::exp(2.0 * eta_a);
    if (std::abs(x) < 1e-12) return e * d * (1.0 + 0.5 * x);
    return e * std::expm1(x) / (2.0 * slope);
  }

  template <class Key>
  std::size_t locate(double value, Key key) const {
    if (knots_.empty()) throw DomainError("empty time map");
    std::size_t lo = 0, hi = knots_.size() - 1;
    if (value >= key(knots_[hi])) return hi;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (key(knots_[mid]) <= value ? lo : hi) = mid;
    }
    return lo;
  }

  std::vector<Knot> knots_;
};

struct AngleFlowOptions {
  /// Fraction of the explicit limit min(h^2/2, h / max|P + Q z|).
  double safety = 0.5;
};

namespace detail {

struct AngleRates {
  std::vector<double> dv;
  double deta = 0.0;
  double dx = 0.0;  ///< d x_left / d tau
  double bmax = 0.0;
};

inline AngleRates angle_rates(const AngleFlowState& s) {
  const auto c = coefficients(s);
  const std::size_t m = s.intervals();
  const double h = s.spacing();
  AngleRates r;
  r.dv.assign(m + 1, 0.0);
  for (std::size_t j = 1; j < m; ++j) {
    const double b = c.p_values[j] + c.q_value * s.z[j];
    r.bmax = std::max(r.bmax, std::abs(b));
    r.dv[j] = (s.v[j + 1] - 2.0 * s.v[j] + s.v[j - 1]) / (h * h) +
              b * (s.v[j + 1] - s.v[j - 1]) / (2.0 * h);
  }
  r.deta = c.q_value;
  const auto vz = numerics::first_derivative_4th(s.v, h);
  r.dx = -std::exp(s.eta) / std::sin(s.angles.psi_minus) * (vz.front() + s.angles.total());
  return r;
}

inline void check_angle_state(const AngleFlowState& s) {
  for (double v : s.v)
    if (!std::isfinite(v)) throw DivergenceError("angle flow produced a non-finite value", s.t);
  if (!std::isfinite(s.eta) || !std::isfinite(s.x_left))
    throw DivergenceError("angle flow produced a non-finite length or position", s.t);
}

}  // namespace detail

inline double stable_dtau(const AngleFlowState& s, double safety) {
  const auto c = coefficients(s);
  double bmax = 0.0;
  for (std::size_t j = 0; j < s.z.size(); ++j)
    bmax = std::max(bmax, std::abs(c.p_values[j] + c.q_value * s.z[j]));
  const double h = s.spacing();
  return safety * std::min(0.5 * h * h, bmax > 0.0 ? h / bmax : std::numeric_limits<double>::infinity());
}

/// One explicit midpoint step of size min(dtau_max, stable limit). The pins
/// v(0) = psi_minus and v(1) = -psi_plus are never touched; t follows from the
/// piecewise-linear eta over the step.
inline AngleFlowState step_v(const AngleFlowState& s, double dtau_max, const AngleFlowOptions& opt = {}) {
  if (!(dtau_max > 0.0)) throw DomainError("dtau_max must be positive");
  const std::size_t m = s.intervals();
  const auto r1 = detail::angle_rates(s);
  const double h = s.spacing();
  double dtau = opt.safety * std::min(0.5 * h * h, r1.bmax > 0.0 ? h / r1.bmax : 1e300);
  dtau = std::min(dtau, dtau_max);

  AngleFlowState mid = s;
  for (std::size_t j = 1; j < m; ++j) mid.v[j] += 0.5 * dtau * r1.dv[j];
  mid.eta += 0.5 * dtau * r1.deta;
  const auto r2 = detail::angle_rates(mid);

  AngleFlowState out = s;
  for (std::size_t j = 1; j < m; ++j) out.v[j] += dtau * r2.dv[j];
  out.eta += dtau * r2.deta;
  out.x_left += dtau * r2.dx;
  out.tau = s.tau + dtau;
  TimeMap tm(s.tau, s.eta, s.t);
  out.t = tm.extend(out.tau, out.eta);
  detail::check_angle_state(out);
  return out;
}

struct AngleSnapshot {
  double t = 0.0;
  AngleFlowState state;
};

struct AngleEvolveOptions {
  AngleFlowOptions flow;
  std::size_t stride = 100;
  bool keep_snapshots = true;
  std::function<void(const AngleFlowState&)> on_snapshot;
};

/// Integrate until physical time t_end. The last step is shortened (by a few
/// secant corrections on dtau) so that it lands on t_end.
inline std::vector<AngleSnapshot> evolve_angle(const AngleFlowState& initial, double t_end,
                                               const AngleEvolveOptions& opt = {}) {
  if (t_end < initial.t) throw DomainError("t_end precedes the initial time");
  std::vector<AngleSnapshot> traj;
  auto take = [&](const AngleFlowState& s) {
    if (opt.on_snapshot) opt.on_snapshot(s);
    if (opt.keep_snapshots) traj.push_back({s.t, s});
  };
  AngleFlowState s = initial;
  take(s);
  std::size_t since = 0;
  while (s.t < t_end) {
    AngleFlowState next = step_v(s, std::numeric_limits<double>::infinity(), opt.flow);
    if (next.t >= t_end) {
      // Land exactly on t_end.
      double a = 0.0, fa = s.t - t_end;
      double b = next.tau - s.tau, fb = next.t - t_end;
      for (int it = 0; it < 8 && std::abs(fb) > 1e-15 * std::max(1.0, t_end); ++it) {
        const double c = b - fb * (b - a) / (fb - fa);
        next = step_v(s, c, opt.flow);
        a = b;
        fa = fb;
        b = c;
        fb = next.t - t_end;
      }
      next.t = t_end;
    }
    s = std::move(next);
    if (++since == opt.stride || s.t >= t_end) {
      take(s);
      since = 0;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Conversions

/// Angle state of the curve described by a concave profile: z is arc length
/// from the left endpoint divided by L, and v(z) is read off by cubic
/// interpolation of theta against z.
inline AngleFlowState angle_state_from_profile(const CurvatureProfile& p, double x_left,
                                               std::size_t m, double t = 0.0) {
  require_concave(p);
  const std::size_t n = p.intervals();
  std::vector<double> ds(n + 1);
  for (std::size_t i = 0; i <= n; ++i) ds[i] = -1.0 / p.kappa[i];
  const auto tail = numerics::cumulative_from_right(ds, p.spacing());
  const double L = tail.front();
  // Increasing z with the matching theta (theta decreases along the curve).
  std::vector<double> zs(n + 1), th(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    zs[k] = tail[n - k] / L;
    th[k] = p.grid[n - k];
  }
  zs.front() = 0.0;
  zs.back() = 1.0;
  AngleFlowState s;
  s.angles = p.angles;
  s.z = unit_grid(m);
  s.v.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) s.v[j] = numerics::interpolate_cubic(zs, th, s.z[j]);
  s.v.front() = p.angles.psi_minus;
  s.v.back() = -p.angles.psi_plus;
  s.eta = std::log(L);
  s.t = t;
  s.tau = 0.0;
  s.x_left = x_left;
  return s;
}

/// Angle state of a traveling wave with v(z) taken from the exact profile:
/// each node solves int_{v_j}^{v_{j-1}} -1/kappa_W dtheta = L / m by Newton's
/// method with Gauss-Kronrod quadrature, so no grid interpolation is involved.
inline AngleFlowState angle_state_from_wave(const TravelingWave& w, std::size_t m, double x_left = 0.0) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  auto kw = [&](double th) { return wave_curvature(w.angles, w.c, w.length, th); };
  AngleFlowState s;
  s.angles = w.angles;
  s.z = unit_grid(m);
  s.v.resize(m + 1);
  s.v.front() = w.angles.psi_minus;
  // The continuous length of kappa_W (which may differ from w.length in the
  // last digits when c was fitted to a grid), so that v(1) lands on the pin.
  const double total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double x) { return -1.0 / kw(x); }, -w.angles.psi_plus, w.angles.psi_minus, 15, 1e-15);
  const double ds = total / static_cast<double>(m);
  for (std::size_t j = 1; j < m; ++j) {
    const double prev = s.v[j - 1];
    double th = prev + ds * kw(prev);
    for (int it = 0; it < 50; ++it) {
      const double arc = GK::integrate([&](double x) { return -1.0 / kw(x); }, th, prev, 0, 0.0);
      const double step = (arc - ds) * kw(th);
      th -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(th))) break;
    }
    s.v[j] = th;
  }
  s.v.back() = -w.angles.psi_plus;
  s.eta = std::log(total);
  s.x_left = x_left;
  return s;
}

/// Curvature profile on an n-interval theta grid: kappa = v_z / L at the
/// z-nodes, interpolated in theta. Requires v strictly decreasing.
inline CurvatureProfile profile_from_angle_state(const AngleFlowState& s, std::size_t n) {
  const std::size_t m = s.intervals();
  for (std::size_t j = 0; j < m; ++j)
    if (!(s.v[j + 1] < s.v[j]))
      throw ConcavityError("angle profile is not strictly decreasing; no angle parameterization",
                           s.v[j], s.t);
  const auto vz = numerics::first_derivative_4th(s.v, s.spacing());
  const double L = s.length();
  std::vector<double> th(m + 1), k(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    th[j] = s.v[m - j];
    k[j] = vz[m - j] / L;
  }
  auto grid = angle_grid(s.angles, n);
  std::vector<double> kappa(n + 1);
  for (std::size_t i = 0; i <= n; ++i) kappa[i] = numerics::interpolate_cubic(th, k, grid[i]);
  return CurvatureProfile(s.angles, std::move(grid), std::move(kappa));
}

/// The planar curve X(z) = (x_left, 0) + L int_0^z (cos v, sin v) dz.
inline PlanarCurve reconstruct_from_angle(const AngleFlowState& s) {
  const std::size_t m = s.intervals();
  std::vector<double> c(m + 1), sn(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    c[j] = std::cos(s.v[j]);
    sn[j] = std::sin(s.v[j]);
  }
  const auto X = numerics::cumulative_from_left(c, s.spacing());
  const auto Y = numerics::cumulative_from_left(sn, s.spacing());
  const double L = s.length();
  PlanarCurve out;
  out.angles = s.angles;
  out.x_left = s.x_left;
  out.points.resize(m + 1);
  out.theta = s.v;
  for (std::size_t j = 0; j <= m; ++j) out.points[j] = {s.x_left + L * X[j], L * Y[j]};
  return out;
}

/// Tangential speed alpha(p) of the arc-length-proportional parameterization
/// p in [-1, 1] (p = -1 at the left endpoint):
///   alpha(p) = -cot(psi_minus)(kappa(psi_minus) + K/L) - int_{theta(p)}^{psi_minus} V dtheta
///              + (L'/2)(p + 1),      V = kappa + K/L,
/// evaluated on the theta grid and interpolated in p.
inline double tangential_speed(const CurvatureProfile& prof, double L, double dL_dt, double p) {
  require_concave(prof);
  if (!(p >= -1.0 && p <= 1.0)) throw DomainError("tangential_speed: p must lie in [-1, 1]");
  const std::size_t n = prof.intervals();
  const double h = prof.spacing();
  const double KL = prof.angles.total() / L;
  std::vector<double> V(n + 1), ds(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    V[i] = prof.kappa[i] + KL;
    ds[i] = -1.0 / prof.kappa[i];
  }
  const auto IV = numerics::cumulative_from_right(V, h);
  const auto S = numerics::cumulative_from_right(ds, h);
  const double base = -cot_angle(prof.angles.psi_minus) * (prof.kappa.back() + KL);
  if (p == -1.0) return base;
  std::vector<double> ps(n + 1), alpha(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const std::size_t i = n - k;
    ps[k] = -1.0 + 2.0 * S[i] / L;
    alpha[k] = base - IV[i] + 0.5 * dL_dt * (ps[k] + 1.0);
  }
  return numerics::interpolate_cubic(ps, alpha, p);
}

}  // namespace geoflow
