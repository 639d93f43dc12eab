#pragma once

// Traveling waves: curves that keep their shape and slide along the x-axis
// with constant speed c. Their curvature in the angle variable is
//   kappa_W(theta) = -c sin(theta) - K / L_W,   K = psi_plus + psi_minus,
// and c is fixed by requiring both endpoints to lie on the axis.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "geoflow/contact_angles.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/numerics.hpp"

namespace geoflow {

struct TravelingWave {
  ContactAngles angles;
  double c = 0.0;       ///< speed of translation along +x
  double length = 1.0;  ///< L_W
  CurvatureProfile profile;
  double area = 0.0;    ///< A_W
};

/// g(c) = int_{-psi_plus}^{psi_minus} sin / (c sin + K) dtheta, evaluated by
/// adaptive Gauss-Kronrod quadrature. Strictly decreasing in c on the
/// admissible interval (see wave_speed_bracket). The integrand has one sign on
/// each side of theta = 0, so the two halves are integrated separately: the
/// quadrature's relative tolerance is meaningful there even where g vanishes.
inline double wave_speed_residual(const ContactAngles& angles, double c) {
  const double K = angles.total();
  auto f = [&](double th) {
    const double s = std::sin(th);
    return s / (c * s + K);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  return GK::integrate(f, -angles.psi_plus, 0.0, 15, 1e-14) +
         GK::integrate(f, 0.0, angles.psi_minus, 15, 1e-14);
}

/// Open interval of speeds for which c sin(theta) + K stays positive on
/// [-psi_plus, psi_minus], i.e. for which -c sin - K is a concave profile.
/// When an angle exceeds pi/2 the extreme of sin is reached inside the range,
/// so the bound uses sin(min(psi, pi/2)).
inline std::pair<double, double> wave_speed_bracket(const ContactAngles& angles) {
  const double K = angles.total();
  const double half = std::numbers::pi / 2;
  return {-K / std::sin(std::min(angles.psi_minus, half)),
          K / std::sin(std::min(angles.psi_plus, half))};
}

/// Speed of the wave normalized to unit length: the root of g.
inline double solve_wave_speed(const ContactAngles& angles) {
  angles.validate();
  if (angles.symmetric()) return 0.0;
  const auto [cmin, cmax] = wave_speed_bracket(angles);
  auto g = [&](double c) { return wave_speed_residual(angles, c); };
  for (double delta = 1e-3; delta >= 1e-15; delta *= 1e-3) {
    const double a = cmin * (1.0 - delta), b = cmax * (1.0 - delta);
    const double ga = g(a), gb = g(b);
    if (!std::isfinite(ga) || !std::isfinite(gb) || ga * gb > 0.0) continue;
    auto r = numerics::find_root(g, a, b, ga, gb, 1e-14, 1e-15);
    return r.x;
  }
  throw Error("wave speed bracket failure for psi_plus=" + std::to_string(angles.psi_plus) +
              " psi_minus=" + std::to_string(angles.psi_minus));
}

/// kappa_W(theta) for speed c and length L.
inline double wave_curvature(const ContactAngles& angles, double c, double length, double theta) {
  return -c * std::sin(theta) - angles.total() / length;
}

namespace detail {

inline double discrete_speed_residual(const std::vector<double>& grid, double K, double h, double c) {
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = std::sin(grid[i]);
    f[i] = s / (c * s + K);
  }
  return numerics::simpson(f, h);
}

}  // namespace detail

/// Unit-length wave sampled on an n-interval grid.
///
/// The speed is polished so that the endpoint condition holds for the grid's
/// own Simpson rule; then the discrete length is 1 and the discrete endpoint
/// residual is 0 to rounding, and the profile is an exact equilibrium of the
/// discrete flow. A grid too coarse to keep this polished speed within 1e-6
/// (relative) of the true one is rejected.
inline TravelingWave build_wave(const ContactAngles& angles, std::size_t n) {
  angles.validate();
  const double c_exact = solve_wave_speed(angles);
  auto grid = angle_grid(angles, n);
  const double K = angles.total();
  const double h = K / static_cast<double>(n);

  double c = c_exact;
  if (!angles.symmetric()) {
    auto g = [&](double s) { return detail::discrete_speed_residual(grid, K, h, s); };
    const auto [cmin, cmax] = wave_speed_bracket(angles);
    const double scale = std::max(1.0, std::abs(c_exact));
    double d = 1e-6 * scale;
    double a = c_exact - d, b = c_exact + d;
    double ga = g(a), gb = g(b);
    while (ga * gb > 0.0 && d < 1e-2 * scale) {
      d *= 10.0;
      a = std::max(c_exact - d, 0.5 * (c_exact + cmin));
      b = std::min(c_exact + d, 0.5 * (c_exact + cmax));
      ga = g(a);
      gb = g(b);
    }
    if (!(ga * gb <= 0.0))
      throw Error("grid with n=" + std::to_string(n) + " does not resolve the wave speed");
    c = numerics::find_root(g, a, b, ga, gb, 1e-16 * scale, 0.0, 200).x;
    if (std::abs(c - c_exact) > 1e-6 * scale)
      throw Error("grid with n=" + std::to_string(n) + " is too coarse for this wave (speed error " +
                  std::to_string(std::abs(c - c_exact)) + ")");
  }

  std::vector<double> kappa(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) kappa[i] = wave_curvature(angles, c, 1.0, grid[i]);
  TravelingWave w;
  w.angles = angles;
  w.c = c;
  w.length = 1.0;
  w.profile = CurvatureProfile(angles, std::move(grid), std::move(kappa));
  require_concave(w.profile);

  const double L = length_of(w.profile);
  const double res = endpoint_residual(w.profile);
  if (std::abs(L - 1.0) > 1e-10 || std::abs(res) > 1e-10)
    throw Error("traveling wave consistency check failed: length-1=" + std::to_string(L - 1.0) +
                " endpoint residual=" + std::to_string(res));
  w.area = signed_area(w.profile);
  return w;
}

/// The member of the wave family with area target_area: scale by
/// lambda = sqrt(target / area), which divides curvature and speed by lambda.
inline TravelingWave scale_to_area(const TravelingWave& w, double target_area) {
  if (!(target_area > 0.0) || !std::isfinite(target_area))
    throw DomainError("target area must be positive, got " + std::to_string(target_area));
  const double lambda = std::sqrt(target_area / w.area);
  if (lambda == 1.0) return w;
  TravelingWave out = w;
  out.profile = scale_profile(w.profile, lambda);
  out.length = w.length * lambda;
  out.c = w.c / lambda;
  out.area = target_area;
  return out;
}

/// Same as scale_to_area, parameterized by the target length instead.
inline TravelingWave scale_to_length(const TravelingWave& w, double target_length) {
  if (!(target_length > 0.0) || !std::isfinite(target_length))
    throw DomainError("target length must be positive");
  const double lambda = target_length / w.length;
  if (lambda == 1.0) return w;
  TravelingWave out = w;
  out.profile = scale_profile(w.profile, lambda);
  out.length = target_length;
  out.c = w.c / lambda;
  out.area = w.area * lambda * lambda;
  return out;
}

/// Horizontal distance between the endpoints, in closed form:
///   (1/c) log((c sin psi_minus + K_L) / (-c sin psi_plus + K_L)),  K_L = K / L_W,
/// with the analytic limit (sin psi_minus + sin psi_plus) / K_L for tiny c.
inline double wave_span(const TravelingWave& w) {
  const double KL = w.angles.total() / w.length;
  const double sm = std::sin(w.angles.psi_minus), sp = std::sin(w.angles.psi_plus);
  if (std::abs(w.c) < 1e-9) return (sm + sp) / KL;
  return (std::log1p(w.c * sm / KL) - std::log1p(-w.c * sp / KL)) / w.c;
}

/// The wave's curve at time t when its left endpoint started at x_left0.
inline PlanarCurve wave_at(const TravelingWave& w, double t, double x_left0) {
  return reconstruct_curve(w.profile, x_left0 + w.c * t);
}

}  // namespace geoflow
