#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow {

/// Interior contact angles at the two sliding endpoints.
///
/// psi_plus belongs to the right endpoint (tangent angle -psi_plus) and
/// psi_minus to the left endpoint (tangent angle +psi_minus). Both lie in
/// (0, pi), so the total turning psi_plus + psi_minus lies in (0, 2 pi).
struct ContactAngles {
  double psi_plus = std::numbers::pi / 2;
  double psi_minus = std::numbers::pi / 2;

  /// Total turning of the tangent, -int kappa ds.
  double total() const noexcept { return psi_plus + psi_minus; }

  bool symmetric() const noexcept { return psi_plus == psi_minus; }

  void validate() const {
    auto ok = [](double a) { return std::isfinite(a) && a > 0.0 && a < std::numbers::pi; };
    if (!ok(psi_plus) || !ok(psi_minus)) {
      std::ostringstream os;
      os << "contact angles must lie in (0, pi): psi_plus=" << psi_plus
         << " psi_minus=" << psi_minus;
      throw DomainError(os.str());
    }
  }

  friend bool operator==(const ContactAngles&, const ContactAngles&) = default;
};

/// cot(a), returning exactly zero at a = pi/2 (the Neumann case).
inline double cot_angle(double a) noexcept {
  if (a == std::numbers::pi / 2 || a == -std::numbers::pi / 2) return 0.0;
  return std::cos(a) / std::sin(a);
}

}  // namespace geoflow
