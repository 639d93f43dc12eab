#pragma once

// Explicit solver for the curvature flow written in the tangent angle:
//
//   kappa_t = kappa^2 (kappa_thth + kappa + K / L),          -psi_plus < theta < psi_minus
//   kappa_th = cot(theta) (kappa + K / L)                     at theta = -psi_plus, psi_minus
//   L = -int dtheta / kappa,   K = psi_plus + psi_minus.
//
// The left endpoint moves with dx/dt = -(kappa(psi_minus) + K/L) / sin(psi_minus).
//
// Derivatives use stencils that are exact on span{1, sin, cos}. The scheme is
// second order like the plain one, but the traveling waves -c sin - K/L are
// exact equilibria of the discrete system, so stationarity is preserved to
// rounding rather than to truncation error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/contact_angles.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/numerics.hpp"

namespace geoflow {

struct ThetaFlowState {
  CurvatureProfile profile;
  double t = 0.0;
  double x_left = 0.0;
  std::size_t step_count = 0;
};

struct StepReport {
  double dt_used = 0.0;
  double max_interior_residual = 0.0;  ///< max |kappa_t| over interior nodes (stage rate used)
  double boundary_residual_left = 0.0;
  double boundary_residual_right = 0.0;
};

struct ThetaFlowOptions {
  /// Fraction of the explicit stability limit h^2 / (2 max kappa^2).
  double safety = 0.5;
  /// Steps that bring some kappa above -concavity_floor are rejected.
  double concavity_floor = 1e-6;
  /// Fixed-point sweeps coupling the boundary nodes with the length.
  int boundary_iterations = 3;
};

/// Thrown by evolve when a step fails; carries the last accepted state and
/// the original error.
class FlowFailure : public Error {
 public:
  FlowFailure(const std::string& what, ThetaFlowState last_good, std::exception_ptr cause)
      : Error(what), last_good_(std::move(last_good)), cause_(std::move(cause)) {}
  const ThetaFlowState& last_good() const noexcept { return last_good_; }
  /// Rethrows the original ConcavityError / DivergenceError.
  [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }
  bool is_concavity_loss() const {
    try {
      std::rethrow_exception(cause_);
    } catch (const ConcavityError&) {
      return true;
    } catch (...) {
      return false;
    }
  }

 private:
  ThetaFlowState last_good_;
  std::exception_ptr cause_;
};

namespace detail {

inline double second_derivative_at(const numerics::TrigStencils& st, std::span<const double> k,
                                   std::size_t i) {
  const std::size_t n = k.size() - 1;
  if (i == 0) return st.d2_left(k);
  if (i == n) return st.d2_right(k);
  return st.d2_fourth(k, i);
}

// Simpson sum of -1/kappa over the interior nodes only (weights without h/3).
inline double interior_reciprocal_sum(std::span<const double> k) {
  const std::size_t n = k.size() - 1;
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 1; i < n; i += 2) odd -= 1.0 / k[i];
  for (std::size_t i = 2; i < n; i += 2) even -= 1.0 / k[i];
  return 4.0 * odd + 2.0 * even;
}

inline double fast_length(std::span<const double> k, double h) {
  return h / 3.0 * (interior_reciprocal_sum(k) - 1.0 / k.front() - 1.0 / k.back());
}

// Overwrite kappa[0] and kappa[n] so that the discrete oblique conditions hold,
// iterating with the length they induce. Returns that length.
inline double impose_boundary(CurvatureProfile& p, const numerics::TrigStencils& st, int sweeps) {
  auto& k = p.kappa;
  const std::size_t n = k.size() - 1;
  const double K = p.angles.total();
  const double h = p.spacing();
  const double cp = cot_angle(p.angles.psi_plus);
  const double cm = cot_angle(p.angles.psi_minus);
  const auto& w = st.d1_start;
  const double den_left = w[0] + cp;
  const double den_right = -w[0] - cm;
  if (std::abs(den_left) < 1e-12 || std::abs(den_right) < 1e-12)
    throw DomainError("boundary closure is singular for this grid spacing");
  const double inner = interior_reciprocal_sum(k);
  auto length = [&] { return h / 3.0 * (inner - 1.0 / k[0] - 1.0 / k[n]); };
  for (int s = 0; s < sweeps; ++s) {
    const double KL = K / length();
    k[0] = (-cp * KL - w[1] * k[1] - w[2] * k[2] - w[3] * k[3]) / den_left;
    k[n] = (cm * KL + w[1] * k[n - 1] + w[2] * k[n - 2] + w[3] * k[n - 3]) / den_right;
  }
  return length();
}

inline void check_state(const CurvatureProfile& p, double floor, double t) {
  for (std::size_t i = 0; i < p.kappa.size(); ++i) {
    const double k = p.kappa[i];
    if (!std::isfinite(k))
      throw DivergenceError("non-finite curvature at theta=" + std::to_string(p.grid[i]) +
                                " t=" + std::to_string(t),
                            t);
    if (!(k < -floor))
      throw ConcavityError("curvature reached " + std::to_string(k) + " at theta=" +
                               std::to_string(p.grid[i]) + " t=" + std::to_string(t),
                           p.grid[i], t);
  }
}

inline double left_endpoint_velocity(const CurvatureProfile& p, double L) {
  const double kl = p.kappa.back();
  return -(kl + p.angles.total() / L) / std::sin(p.angles.psi_minus);
}

}  // namespace detail

/// kappa^2 (D2 kappa + kappa + K/L) at every node. Interior nodes use the
/// five-point stencil; the two end nodes use a one-sided four-point stencil.
inline std::vector<double> interior_rhs(const CurvatureProfile& p) {
  require_concave(p);
  const numerics::TrigStencils st(p.spacing());
  const double KL = p.angles.total() / length_of(p);
  const auto& k = p.kappa;
  std::vector<double> r(k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    r[i] = k[i] * k[i] * (detail::second_derivative_at(st, k, i) + k[i] + KL);
  return r;
}

/// Residuals of the oblique conditions, kappa_th - cot(theta)(kappa + K/L),
/// at theta = -psi_plus (first) and theta = psi_minus (second), with kappa_th
/// from the one-sided four-point stencil the solver uses.
inline std::pair<double, double> boundary_condition_residual(const CurvatureProfile& p) {
  require_concave(p);
  const numerics::TrigStencils st(p.spacing());
  const double KL = p.angles.total() / length_of(p);
  const auto& k = p.kappa;
  const double left = st.d1_left(k) + cot_angle(p.angles.psi_plus) * (k.front() + KL);
  const double right = st.d1_right(k) - cot_angle(p.angles.psi_minus) * (k.back() + KL);
  return {left, right};
}

inline std::pair<double, double> boundary_condition_residual(const ThetaFlowState& s) {
  return boundary_condition_residual(s.profile);
}

/// Largest step the explicit scheme accepts for this profile. The five-point
/// second difference has spectral radius 16/(3 h^2), so the diffusion limit
/// is 3 h^2 / (8 max kappa^2) rather than the three-point h^2 / (2 max kappa^2).
inline double stable_dt(const CurvatureProfile& p, double safety) {
  double kmax = 0.0;
  for (double k : p.kappa) kmax = std::max(kmax, k * k);
  const double h = p.spacing();
  return safety * 3.0 * h * h / (8.0 * kmax);
}

/// One explicit midpoint (RK2) step with dt = min(dt_max, stable_dt).
/// Boundary nodes are recomputed from the discrete oblique conditions after
/// each stage, and the length is re-evaluated at every stage.
inline std::pair<ThetaFlowState, StepReport> step(const ThetaFlowState& s, double dt_max,
                                                  const ThetaFlowOptions& opt = {}) {
  if (!(dt_max > 0.0)) throw DomainError("dt_max must be positive");
  detail::check_state(s.profile, opt.concavity_floor, s.t);
  const numerics::TrigStencils st(s.profile.spacing());
  const std::size_t n = s.profile.intervals();
  const double K = s.profile.angles.total();

  const double dt = std::min(dt_max, stable_dt(s.profile, opt.safety));
  const double h = s.profile.spacing();

  std::vector<double> r(n + 1, 0.0);
  auto rates = [&](const CurvatureProfile& p, double L) {
    const double KL = K / L;
    const auto& k = p.kappa;
    double rmax = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      r[i] = k[i] * k[i] * (st.d2_fourth(k, i) + k[i] + KL);
      rmax = std::max(rmax, std::abs(r[i]));
    }
    return rmax;
  };

  rates(s.profile, detail::fast_length(s.profile.kappa, h));
  CurvatureProfile mid = s.profile;
  for (std::size_t i = 1; i < n; ++i) mid.kappa[i] += 0.5 * dt * r[i];
  const double Lm = detail::impose_boundary(mid, st, opt.boundary_iterations);
  detail::check_state(mid, opt.concavity_floor, s.t + 0.5 * dt);

  StepReport rep;
  rep.dt_used = dt;
  rep.max_interior_residual = rates(mid, Lm);
  const double vx = detail::left_endpoint_velocity(mid, Lm);

  ThetaFlowState out = s;
  for (std::size_t i = 1; i < n; ++i) out.profile.kappa[i] += dt * r[i];
  const double L1 = detail::impose_boundary(out.profile, st, opt.boundary_iterations);
  out.t = s.t + dt;
  out.x_left = s.x_left + dt * vx;
  out.step_count = s.step_count + 1;
  detail::check_state(out.profile, opt.concavity_floor, out.t);
  if (!std::isfinite(out.x_left)) throw DivergenceError("left endpoint diverged", out.t);

  const auto& k = out.profile.kappa;
  const double KL = K / L1;
  rep.boundary_residual_left = st.d1_left(k) + cot_angle(out.profile.angles.psi_plus) * (k.front() + KL);
  rep.boundary_residual_right = st.d1_right(k) - cot_angle(out.profile.angles.psi_minus) * (k.back() + KL);
  return {std::move(out), rep};
}

struct ThetaSnapshot {
  double t = 0.0;
  double x_left = 0.0;
  CurvatureProfile profile;
};

struct EvolveOptions {
  ThetaFlowOptions flow;
  double dt_max = std::numeric_limits<double>::infinity();
  /// A snapshot is taken every `stride` steps (and always at the start and end).
  std::size_t stride = 100;
  /// Keep snapshots in the returned trajectory (callbacks see them regardless).
  bool keep_snapshots = true;
  std::function<void(const ThetaFlowState&)> on_snapshot;
  std::function<void(const ThetaFlowState&, const StepReport&)> on_step;
};

/// Integrate from initial.t to t_end. Failures inside a step are rethrown as
/// FlowFailure carrying the last accepted state.
inline std::vector<ThetaSnapshot> evolve(const ThetaFlowState& initial, double t_end,
                                         const EvolveOptions& opt = {}) {
  if (t_end < initial.t) throw DomainError("t_end precedes the initial time");
  require_concave(initial.profile, 0.0, initial.t);
  if (opt.stride == 0) throw DomainError("snapshot stride must be positive");

  std::vector<ThetaSnapshot> traj;
  auto take = [&](const ThetaFlowState& s) {
    if (opt.on_snapshot) opt.on_snapshot(s);
    if (opt.keep_snapshots) traj.push_back({s.t, s.x_left, s.profile});
  };
  ThetaFlowState s = initial;
  take(s);
  std::size_t since = 0;
  while (s.t < t_end) {
    const double remaining = t_end - s.t;
    // Avoid a final sliver step much shorter than the others.
    double cap = std::min(opt.dt_max, remaining);
    const double dts = stable_dt(s.profile, opt.flow.safety);
    if (remaining > dts && remaining < 2.0 * dts) cap = std::min(cap, 0.5 * remaining);
    try {
      auto [next, rep] = step(s, cap, opt.flow);
      if (rep.dt_used >= remaining) next.t = t_end;
      s = std::move(next);
      if (opt.on_step) opt.on_step(s, rep);
    } catch (const Error& e) {
      throw FlowFailure(std::string("theta flow failed: ") + e.what(), s, std::current_exception());
    }
    if (++since == opt.stride || s.t >= t_end) {
      take(s);
      since = 0;
    }
  }
  return traj;
}

}  // namespace geoflow
