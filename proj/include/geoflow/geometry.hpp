#pragma once

// Curves parameterized by tangent angle: curvature profiles on a uniform
// theta grid, reconstruction of the planar curve, and static functionals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoflow/contact_angles.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/numerics.hpp"

namespace geoflow {

/// Uniform grid theta_i = -psi_plus + i h on [-psi_plus, psi_minus], with the
/// last node pinned exactly to psi_minus.
inline std::vector<double> angle_grid(const ContactAngles& angles, std::size_t n) {
  if (n < 16 || n % 2 != 0)
    throw DomainError("angle grid needs an even number of intervals >= 16, got " + std::to_string(n));
  angles.validate();
  const double h = angles.total() / static_cast<double>(n);
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = -angles.psi_plus + static_cast<double>(i) * h;
  grid[n] = angles.psi_minus;
  return grid;
}

/// Curvature sampled on the tangent-angle grid.
struct CurvatureProfile {
  ContactAngles angles;
  std::vector<double> grid;
  std::vector<double> kappa;

  CurvatureProfile() = default;
  CurvatureProfile(ContactAngles a, std::vector<double> g, std::vector<double> k)
      : angles(a), grid(std::move(g)), kappa(std::move(k)) {
    if (grid.size() != kappa.size()) throw DomainError("grid and kappa sizes differ");
    if (grid.size() < 17 || (grid.size() - 1) % 2 != 0)
      throw DomainError("profile needs an even number of intervals >= 16");
    const double slack = 1e-9 * (1.0 + a.total());
    if (!(std::abs(grid.front() + a.psi_plus) <= slack && std::abs(grid.back() - a.psi_minus) <= slack))
      throw DomainError("profile grid must run from -psi_plus to psi_minus");
  }

  /// Sample f(theta) on a fresh uniform grid with n intervals.
  template <class F>
  static CurvatureProfile sample(const ContactAngles& angles, std::size_t n, F&& f) {
    auto grid = angle_grid(angles, n);
    std::vector<double> k(grid.size());
    std::transform(grid.begin(), grid.end(), k.begin(), f);
    return {angles, std::move(grid), std::move(k)};
  }

  std::size_t intervals() const noexcept { return grid.size() - 1; }
  double spacing() const noexcept { return angles.total() / static_cast<double>(intervals()); }
};

/// Throws ConcavityError at the first node with kappa >= -floor (or NaN).
inline void require_concave(const CurvatureProfile& p, double floor = 0.0,
                            double t = std::numeric_limits<double>::quiet_NaN()) {
  for (std::size_t i = 0; i < p.kappa.size(); ++i) {
    if (!(p.kappa[i] < -floor)) {
      throw ConcavityError("curvature is not negative at theta=" + std::to_string(p.grid[i]) +
                               " (kappa=" + std::to_string(p.kappa[i]) + ")",
                           p.grid[i], t);
    }
  }
}

/// Same grid, curvature divided by lambda: the curve scaled by lambda.
inline CurvatureProfile scale_profile(const CurvatureProfile& p, double lambda) {
  CurvatureProfile out = p;
  for (double& k : out.kappa) k /= lambda;
  return out;
}

namespace detail {

template <class F>
std::vector<double> over_kappa(const CurvatureProfile& p, F&& weight) {
  std::vector<double> f(p.kappa.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = weight(p.grid[i]) / p.kappa[i];
  return f;
}

// Integrals from theta to psi_minus of cos/kappa and sin/kappa.
struct TailIntegrals {
  std::vector<double> cos_part;
  std::vector<double> sin_part;
};

inline TailIntegrals tail_integrals(const CurvatureProfile& p) {
  const double h = p.spacing();
  auto c = over_kappa(p, [](double th) { return std::cos(th); });
  auto s = over_kappa(p, [](double th) { return std::sin(th); });
  return {numerics::cumulative_from_right(c, h), numerics::cumulative_from_right(s, h)};
}

}  // namespace detail

/// L = -int dtheta / kappa.
inline double length_of(const CurvatureProfile& p) {
  auto f = detail::over_kappa(p, [](double) { return -1.0; });
  return numerics::simpson(f, p.spacing());
}

/// int sin(theta)/kappa dtheta: the height of the right endpoint above the
/// left one, up to sign. Zero iff both endpoints sit on the x-axis.
inline double endpoint_residual(const CurvatureProfile& p) {
  auto f = detail::over_kappa(p, [](double th) { return std::sin(th); });
  return numerics::simpson(f, p.spacing());
}

/// Signed area 1/2 int <X, N> ds written in the angle variable. The nested
/// integral is evaluated through the cumulative tail integrals, so the cost is
/// linear in the grid size.
inline double signed_area(const CurvatureProfile& p) {
  auto tails = detail::tail_integrals(p);
  std::vector<double> f(p.kappa.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double th = p.grid[i];
    f[i] = (-std::sin(th) * tails.cos_part[i] + std::cos(th) * tails.sin_part[i]) / p.kappa[i];
  }
  return 0.5 * numerics::simpson(f, p.spacing());
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Polyline samples of a curve, ordered from the left endpoint to the right
/// endpoint. theta[k] is the tangent angle at points[k].
struct PlanarCurve {
  std::vector<Point> points;
  std::vector<double> theta;
  double x_left = 0.0;
  ContactAngles angles;

  double x_right() const { return points.back().x; }
};

inline PlanarCurve translate(PlanarCurve c, double dx) {
  for (auto& q : c.points) q.x += dx;
  c.x_left += dx;
  return c;
}

/// Integrate the curve from its curvature:
///   x(theta) = x_left - int_theta^{psi_minus} cos/kappa,
///   y(theta) =        - int_theta^{psi_minus} sin/kappa.
inline PlanarCurve reconstruct_curve(const CurvatureProfile& p, double x_left) {
  require_concave(p);
  auto tails = detail::tail_integrals(p);
  const std::size_t n = p.intervals();
  PlanarCurve c;
  c.angles = p.angles;
  c.x_left = x_left;
  c.points.resize(n + 1);
  c.theta.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const std::size_t i = n - k;
    c.points[k] = {x_left - tails.cos_part[i], -tails.sin_part[i]};
    c.theta[k] = p.grid[i];
  }
  c.points[0] = {x_left, 0.0};
  return c;
}

/// Area of the polygon formed by the polyline and the closing chord, positive
/// for an arc above the axis traversed from left to right.
inline double curve_area(const PlanarCurve& c) {
  const auto& q = c.points;
  if (q.size() < 3) throw DomainError("curve_area needs at least three points");
  double twice = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const Point& a = q[k];
    const Point& b = q[(k + 1) % q.size()];
    twice += b.x * a.y - a.x * b.y;
  }
  return 0.5 * twice;
}

/// Polyline length.
inline double curve_length(const PlanarCurve& c) {
  double s = 0.0;
  for (std::size_t k = 1; k < c.points.size(); ++k)
    s += std::hypot(c.points[k].x - c.points[k - 1].x, c.points[k].y - c.points[k - 1].y);
  return s;
}

// ---------------------------------------------------------------------------
// Hausdorff distance between polylines

struct AlignmentResult {
  double distance = 0.0;
  double shift = 0.0;
};

namespace detail {

inline double point_segment_distance(Point p, Point a, Point b) {
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - a.x - t * ex, p.y - a.y - t * ey);
}

// Segments of a polyline grouped in consecutive runs with bounding boxes, so a
// nearest-segment query can skip runs whose box is already farther away than
// the best segment found.
struct SegmentChunks {
  static constexpr std::size_t kSize = 8;
  struct Box {
    double xmin, xmax, ymin, ymax;
  };
  std::span<const Point> pts;
  std::vector<Box> boxes;

  explicit SegmentChunks(std::span<const Point> p) : pts(p) {
    const std::size_t segs = p.size() - 1;
    for (std::size_t first = 0; first < segs; first += kSize) {
      const std::size_t last = std::min(first + kSize, segs);  // last vertex index
      Box b{p[first].x, p[first].x, p[first].y, p[first].y};
      for (std::size_t j = first + 1; j <= last; ++j) {
        b.xmin = std::min(b.xmin, p[j].x);
        b.xmax = std::max(b.xmax, p[j].x);
        b.ymin = std::min(b.ymin, p[j].y);
        b.ymax = std::max(b.ymax, p[j].y);
      }
      boxes.push_back(b);
    }
  }

  // Distance from q to the polyline shifted by dx. Segments near `hint` are
  // tried first; the query stops as soon as the answer is known to be
  // <= stop_below (it then returns some value <= stop_below).
  double distance(Point q, double dx, double stop_below, std::size_t hint,
                  std::vector<double>& lb) const {
    const std::size_t segs = pts.size() - 1;
    auto seg = [&](std::size_t j) {
      return point_segment_distance(q, {pts[j].x + dx, pts[j].y}, {pts[j + 1].x + dx, pts[j + 1].y});
    };
    double best = std::numeric_limits<double>::infinity();
    const std::size_t lo = hint > 2 ? hint - 2 : 0, hi = std::min(hint + 3, segs);
    for (std::size_t j = lo; j < hi; ++j) best = std::min(best, seg(j));
    if (best <= stop_below) return best;

    const std::size_t nb = boxes.size();
    lb.resize(nb);
    for (std::size_t c = 0; c < nb; ++c) {
      const Box& b = boxes[c];
      const double ex = std::max({b.xmin + dx - q.x, 0.0, q.x - b.xmax - dx});
      const double ey = std::max({b.ymin - q.y, 0.0, q.y - b.ymax});
      lb[c] = std::hypot(ex, ey);
    }
    for (;;) {
      std::size_t c = nb;
      double low = best;
      for (std::size_t k = 0; k < nb; ++k)
        if (lb[k] < low) {
          low = lb[k];
          c = k;
        }
      if (c == nb) return best;
      lb[c] = std::numeric_limits<double>::infinity();
      const std::size_t last = std::min((c + 1) * kSize, segs);
      for (std::size_t j = c * kSize; j < last; ++j) best = std::min(best, seg(j));
      if (best <= stop_below) return best;
    }
  }
};

// max over vertices of `from` of the distance to the polyline `to` shifted by
// dx. Vertices are visited in a scrambled order so the running maximum grows
// quickly, which lets most queries stop at the first segment closer than it.
// Each query starts at the segment with the same relative index, which is
// where the nearest one sits when both polylines sample similar curves.
inline double directed_hausdorff(std::span<const Point> from, const SegmentChunks& to, double dx) {
  const std::size_t m = from.size();
  std::size_t stride = 7919 % m;
  while (stride == 0 || std::gcd(stride, m) != 1) ++stride;
  std::vector<double> scratch;
  double cmax = 0.0;
  for (std::size_t k = 0, i = 0; k < m; ++k, i = (i + stride) % m) {
    const std::size_t hint = m > 1 ? i * (to.pts.size() - 2) / (m - 1) : 0;
    const double d = to.distance(from[i], dx, cmax, hint, scratch);
    cmax = std::max(cmax, d);
  }
  return cmax;
}

inline double directed_hausdorff(std::span<const Point> from, std::span<const Point> to, double dx) {
  return directed_hausdorff(from, SegmentChunks(to), dx);
}

inline void require_polyline(const PlanarCurve& c) {
  if (c.points.size() < 2) throw DomainError("Hausdorff distance needs polylines with >= 2 points");
}

}  // namespace detail

/// Symmetric Hausdorff distance between polyline a and polyline b moved by (dx, 0).
/// Distances are measured from vertices to segments, which is exact up to the
/// sagitta of the polylines.
inline double hausdorff_distance(const PlanarCurve& a, const PlanarCurve& b, double dx = 0.0) {
  detail::require_polyline(a);
  detail::require_polyline(b);
  const double ab = detail::directed_hausdorff(a.points, b.points, dx);
  const double ba = detail::directed_hausdorff(b.points, a.points, -dx);
  return std::max(ab, ba);
}

namespace detail {

inline double hausdorff_prepared(const PlanarCurve& a, const SegmentChunks& ca, const PlanarCurve& b,
                                 const SegmentChunks& cb, double dx) {
  return std::max(directed_hausdorff(a.points, cb, dx), directed_hausdorff(b.points, ca, -dx));
}

}  // namespace detail

namespace detail {

template <class H>
AlignmentResult golden_section(H&& f, double lo, double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double s = 0.5 * (lo + hi);
  return {f(s), s};
}

}  // namespace detail

/// min over s of hausdorff_distance(a, b + (s, 0)), with the minimizing s.
///
/// Without a hint the search scans the bracket [D - R, D + R] (D the offset of
/// the left endpoints, R the sum of the bounding-box diagonals) and refines
/// the best cell by golden-section search. A hint (e.g. the previous shift
/// along a trajectory) replaces the scan by a local bracket that is widened
/// until the minimizer lies strictly inside it.
inline AlignmentResult hausdorff_mod_translation(const PlanarCurve& a, const PlanarCurve& b,
                                                 double tol = 1e-10,
                                                 std::optional<double> hint = std::nullopt) {
  detail::require_polyline(a);
  detail::require_polyline(b);
  const detail::SegmentChunks ca(a.points), cb(b.points);
  auto H = [&](double s) { return detail::hausdorff_prepared(a, ca, b, cb, s); };

  if (hint) {
    double w = std::max(1e3 * tol, H(*hint));
    for (int grow = 0; grow < 30; ++grow, w *= 8.0) {
      auto r = detail::golden_section(H, *hint - w, *hint + w, tol);
      if (std::abs(r.shift - *hint) < 0.9 * w) return r;
    }
  }

  auto diag = [](const PlanarCurve& c) {
    auto [xmin, xmax] = std::minmax_element(c.points.begin(), c.points.end(),
                                            [](Point p, Point q) { return p.x < q.x; });
    auto [ymin, ymax] = std::minmax_element(c.points.begin(), c.points.end(),
                                            [](Point p, Point q) { return p.y < q.y; });
    return std::hypot(xmax->x - xmin->x, ymax->y - ymin->y);
  };
  const double center = a.points.front().x - b.points.front().x;
  const double radius = diag(a) + diag(b) + tol;

  // Coarse scan first: H need not be unimodal over the whole bracket.
  constexpr int kScan = 32;
  double best_s = center, best_h = H(center);
  const double step = 2.0 * radius / kScan;
  for (int k = 0; k <= kScan; ++k) {
    const double s = center - radius + k * step;
    const double hs = H(s);
    if (hs < best_h) {
      best_h = hs;
      best_s = s;
    }
  }
  if (best_h == 0.0) return {0.0, best_s};
  auto r = detail::golden_section(H, best_s - step, best_s + step, tol);
  if (r.distance <= best_h) return r;
  return {best_h, best_s};
}

}  // namespace geoflow
