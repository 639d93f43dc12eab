#pragma once

// Small numerical building blocks shared by the solvers: composite Simpson
// quadrature and its cumulative variants on uniform grids, local Lagrange
// interpolation, finite-difference weights, and a bracketed scalar root finder.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "geoflow/errors.hpp"

namespace geoflow::numerics {

/// Composite Simpson rule on a uniform grid with an even number of intervals.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size() - 1;
  assert(f.size() >= 3 && n % 2 == 0);
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 1; i < n; i += 2) odd += f[i];
  for (std::size_t i = 2; i < n; i += 2) even += f[i];
  return h / 3.0 * (f[0] + f[n] + 4.0 * odd + 2.0 * even);
}

namespace detail {

// Integral over the single interval [x_i, x_{i+1}] from the cubic through
// four neighbouring nodes (one-sided at the ends of the grid).
inline double interval_integral(std::span<const double> f, double h, std::size_t i) {
  const std::size_t n = f.size() - 1;
  if (i == 0) return h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
  if (i + 1 == n) return h / 24.0 * (f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n]);
  return h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
}

}  // namespace detail

/// out[i] = integral of f from x_i to x_n. Simpson pairs anchored at the right
/// end, plus a single fourth-order interval for the nodes in between, so
/// out[0] agrees with simpson(f, h).
inline std::vector<double> cumulative_from_right(std::span<const double> f, double h) {
  const std::size_t n = f.size() - 1;
  assert(f.size() >= 5 && n % 2 == 0);
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t k = 2; k <= n; k += 2) {
    const std::size_t i = n - k;
    out[i] = out[i + 2] + h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
  }
  for (std::size_t k = 1; k <= n; k += 2) {
    const std::size_t i = n - k;
    out[i] = out[i + 1] + detail::interval_integral(f, h, i);
  }
  return out;
}

/// out[i] = integral of f from x_0 to x_i; mirror image of cumulative_from_right.
inline std::vector<double> cumulative_from_left(std::span<const double> f, double h) {
  const std::size_t n = f.size() - 1;
  assert(f.size() >= 5 && n % 2 == 0);
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t i = 2; i <= n; i += 2)
    out[i] = out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
  for (std::size_t i = 1; i <= n; i += 2)
    out[i] = out[i - 1] + detail::interval_integral(f, h, i - 1);
  return out;
}

/// Cubic Lagrange interpolation through the four nodes nearest to x.
/// xs must be strictly increasing with at least four entries.
inline double interpolate_cubic(std::span<const double> xs, std::span<const double> ys, double x) {
  const std::size_t m = xs.size();
  assert(m >= 4 && ys.size() == m);
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::ptrdiff_t k = std::distance(xs.begin(), it) - 1;
  const std::ptrdiff_t start = std::clamp<std::ptrdiff_t>(k - 1, 0, static_cast<std::ptrdiff_t>(m) - 4);
  double sum = 0.0;
  for (std::ptrdiff_t a = start; a < start + 4; ++a) {
    double w = 1.0;
    for (std::ptrdiff_t b = start; b < start + 4; ++b)
      if (b != a) w *= (x - xs[b]) / (xs[a] - xs[b]);
    sum += w * ys[a];
  }
  return sum;
}

/// Solve a dense N x N system in place (partial pivoting). Used for stencil weights.
template <std::size_t N>
std::array<double, N> solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw DomainError("singular stencil system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < N; ++r) {
      const double m = a[r][col] / a[col][col];
      for (std::size_t c = col; c < N; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  std::array<double, N> x{};
  for (std::size_t r = N; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < N; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

/// Finite-difference weights on a uniform grid of spacing h that are exact
/// for the span of {1, sin, cos}; the four-point one-sided stencils are also
/// exact for linear functions. The three-point centred stencils are second
/// order, the one-sided first derivative third order, and the five-point
/// second derivative (`d2_fourth`, also exact for x and x^2) fourth order in
/// the interior and third order at the nodes next to the ends. Exactness on trigonometric data
/// makes profiles a + b sin(theta) + c cos(theta) exact discrete equilibria of
/// kappa_thetatheta + kappa + const with oblique boundary conditions.
struct TrigStencils {
  double h = 0.0;
  double d2_scale = 0.0;          ///< (f[i+1] - 2 f[i] + f[i-1]) * d2_scale
  double d1_scale = 0.0;          ///< (f[i+1] - f[i-1]) * d1_scale
  std::array<double, 4> d1_start{};  ///< f'(x0) ~ sum w_k f_k, k = 0..3
  std::array<double, 4> d2_start{};  ///< f''(x0) ~ sum w_k f_k, k = 0..3
  std::array<double, 5> d2_centre5{};  ///< f''(x_i), nodes i-2..i+2
  std::array<double, 5> d2_near5{};    ///< f''(x_1), nodes 0..4

  explicit TrigStencils(double spacing) : h(spacing) {
    const double sh2 = std::sin(h / 2.0);
    d2_scale = 1.0 / (4.0 * sh2 * sh2);
    d1_scale = 1.0 / (2.0 * std::sin(h));

    // One-sided weights from the scaled basis {1, u, (1 - cos hu)/h^2,
    // (hu - sin hu)/h^3}, u = x/h, which spans {1, x, cos x, sin x} and keeps
    // the system well conditioned as h -> 0.
    std::array<std::array<double, 4>, 4> a{};
    for (std::size_t k = 0; k < 4; ++k) {
      const double u = static_cast<double>(k);
      const double x = h * u;
      const double half = std::sin(x / 2.0);
      a[0][k] = 1.0;
      a[1][k] = u;
      a[2][k] = 2.0 * half * half / (h * h);
      a[3][k] = (x - std::sin(x)) / (h * h * h);
    }
    d1_start = solve_dense<4>(a, {0.0, 1.0 / h, 0.0, 0.0});
    auto w = solve_dense<4>(a, {0.0, 0.0, 1.0, 0.0});
    for (std::size_t k = 0; k < 4; ++k) d2_start[k] = w[k] / (h * h);

    d2_centre5 = fit_d2_five(h, -2.0);
    d2_near5 = fit_d2_five(h, -1.0);
  }

  /// Second derivative at offset 0 from nodes first, first+1, ..., first+4
  /// (offsets in units of h), exact on {1, x, x^2, cos x, sin x}. The basis
  /// {1, u, u^2/2, (hu - sin hu)/h^3, 24 (u^2/2 - (1 - cos hu)/h^2)/h^2}
  /// spans the same space and stays well conditioned as h -> 0; the last two
  /// are summed as series to avoid cancellation.
  static std::array<double, 5> fit_d2_five(double h, double first) {
    auto sine_rest = [h](double u) {  // (x - sin x)/h^3
      const double x = h * u;
      if (std::abs(x) > 1.0) return (x - std::sin(x)) / (h * h * h);
      double term = x * x * x / 6.0, sum = 0.0;
      for (int j = 1; j < 30 && term != 0.0; ++j) {
        sum += term;
        term *= -x * x / ((2.0 * j + 2.0) * (2.0 * j + 3.0));
      }
      return sum / (h * h * h);
    };
    auto cosine_rest = [h](double u) {  // 24 (x^2/2 - (1 - cos x))/h^4
      const double x = h * u;
      if (std::abs(x) > 1.0) {
        const double half = std::sin(x / 2.0);
        return 24.0 * (x * x / 2.0 - 2.0 * half * half) / (h * h * h * h);
      }
      double term = x * x * x * x / 24.0, sum = 0.0;
      for (int j = 2; j < 30 && term != 0.0; ++j) {
        sum += term;
        term *= -x * x / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
      }
      return 24.0 * sum / (h * h * h * h);
    };
    std::array<std::array<double, 5>, 5> a{};
    for (std::size_t k = 0; k < 5; ++k) {
      const double u = first + static_cast<double>(k);
      a[0][k] = 1.0;
      a[1][k] = u;
      a[2][k] = 0.5 * u * u;
      a[3][k] = sine_rest(u);
      a[4][k] = cosine_rest(u);
    }
    auto w = solve_dense<5>(a, {0.0, 0.0, 1.0, 0.0, 0.0});
    for (auto& x : w) x /= h * h;
    return w;
  }

  /// Derivative at node 0 from nodes 0..3.
  double d1_left(std::span<const double> f) const {
    return d1_start[0] * f[0] + d1_start[1] * f[1] + d1_start[2] * f[2] + d1_start[3] * f[3];
  }
  /// Derivative at node n from nodes n..n-3.
  double d1_right(std::span<const double> f) const {
    const std::size_t n = f.size() - 1;
    return -(d1_start[0] * f[n] + d1_start[1] * f[n - 1] + d1_start[2] * f[n - 2] +
             d1_start[3] * f[n - 3]);
  }
  double d2_left(std::span<const double> f) const {
    return d2_start[0] * f[0] + d2_start[1] * f[1] + d2_start[2] * f[2] + d2_start[3] * f[3];
  }
  double d2_right(std::span<const double> f) const {
    const std::size_t n = f.size() - 1;
    return d2_start[0] * f[n] + d2_start[1] * f[n - 1] + d2_start[2] * f[n - 2] +
           d2_start[3] * f[n - 3];
  }
  double d2_interior(std::span<const double> f, std::size_t i) const {
    return (f[i + 1] - 2.0 * f[i] + f[i - 1]) * d2_scale;
  }
  /// Five-point second derivative at an interior node 1 <= i <= n-1 (n >= 4):
  /// centred where possible, biased towards the interior next to the ends.
  double d2_fourth(std::span<const double> f, std::size_t i) const {
    const std::size_t n = f.size() - 1;
    const auto& b = d2_near5;
    if (i == 1) return b[0] * f[0] + b[1] * f[1] + b[2] * f[2] + b[3] * f[3] + b[4] * f[4];
    if (i + 1 == n) return b[0] * f[n] + b[1] * f[n - 1] + b[2] * f[n - 2] + b[3] * f[n - 3] + b[4] * f[n - 4];
    const auto& w = d2_centre5;
    return w[0] * (f[i - 2] + f[i + 2]) + w[1] * (f[i - 1] + f[i + 1]) + w[2] * f[i];
  }

  /// First derivative at every node.
  std::vector<double> first_derivative(std::span<const double> f) const {
    const std::size_t n = f.size() - 1;
    std::vector<double> d(n + 1);
    d[0] = d1_left(f);
    d[n] = d1_right(f);
    for (std::size_t i = 1; i < n; ++i) d[i] = (f[i + 1] - f[i - 1]) * d1_scale;
    return d;
  }
};

/// Fourth-order first derivative at every node of a uniform grid (m >= 4
/// intervals): centred in the interior, biased next to the ends, one-sided
/// five-point at the ends.
inline std::vector<double> first_derivative_4th(std::span<const double> f, double h) {
  const std::size_t m = f.size() - 1;
  assert(m >= 4);
  std::vector<double> d(m + 1);
  const double s = 1.0 / (12.0 * h);
  d[0] = s * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
  d[1] = s * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
  for (std::size_t i = 2; i + 2 <= m; ++i)
    d[i] = s * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
  d[m - 1] = -s * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
  d[m] = -s * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
  return d;
}

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Root of a continuous f on [a, b] with f(a), f(b) of opposite sign.
/// Regula falsi steps (Illinois-weighted) with a bisection fallback whenever
/// the bracket fails to halve; stops when |f| <= ftol or the bracket is
/// narrower than xtol.
template <class F>
RootResult find_root(F&& f, double a, double b, double fa, double fb, double xtol, double ftol,
                     int max_iter = 400) {
  if (!(fa * fb <= 0.0)) throw DomainError("find_root: bracket does not change sign");
  if (fa == 0.0) return {a, fa, 0};
  if (fb == 0.0) return {b, fb, 0};
  RootResult best{std::abs(fa) < std::abs(fb) ? a : b, std::abs(fa) < std::abs(fb) ? fa : fb, 0};
  int side = 0;
  double width_before = std::abs(b - a);
  for (int it = 1; it <= max_iter; ++it) {
    double x = (a * fb - b * fa) / (fb - fa);
    const bool stalled = it % 3 == 0 && std::abs(b - a) > 0.5 * width_before;
    if (stalled || !(x > std::min(a, b) && x < std::max(a, b))) x = 0.5 * (a + b);
    if (it % 3 == 0) width_before = std::abs(b - a);
    const double fx = f(x);
    if (std::abs(fx) < std::abs(best.fx)) best = {x, fx, it};
    best.iterations = it;
    if (std::abs(fx) <= ftol || fx == 0.0) return {x, fx, it};
    if ((fx < 0.0) == (fa < 0.0)) {
      a = x;
      fa = fx;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = x;
      fb = fx;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    if (std::abs(b - a) <= xtol) break;
  }
  return best;
}

}  // namespace geoflow::numerics
