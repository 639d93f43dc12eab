#pragma once

// File formats. JSON documents are built with nlohmann::json but emitted by
// our own writer so that every float is printed with 17 significant digits
// (which reads back to the identical double). Diagnostics go to CSV.

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "geoflow/angle_flow.hpp"
#include "geoflow/diagnostics.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geometry.hpp"
#include "geoflow/traveling_wave.hpp"

namespace geoflow::io {

using json = nlohmann::json;

inline std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  // Keep integral-valued floats recognizable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline void write_string(std::ostream& os, const std::string& s) { os << json(s).dump(); }

inline void write(std::ostream& os, const json& j, int indent, int depth) {
  const auto pad = [&](int d) {
    if (indent > 0) os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        pad(depth + 1);
        write_string(os, it.key());
        os << (indent > 0 ? ": " : ":");
        write(os, it.value(), indent, depth + 1);
      }
      pad(depth);
      os << '}';
      return;
    }
    case json::value_t::array: {
      // Numeric arrays stay on one line; they are long.
      bool flat = true;
      for (const auto& e : j)
        if (e.is_structured()) flat = false;
      os << '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat && indent > 0 ? ", " : ",");
        first = false;
        if (!flat) pad(depth + 1);
        write(os, e, indent, depth + 1);
      }
      if (!flat && !j.empty()) pad(depth);
      os << ']';
      return;
    }
    case json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream os;
  detail::write(os, j, indent, 0);
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << dump(j) << '\n';
  if (!f) throw Error("failed writing " + path.string());
}

inline json read_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Documents

inline json to_json(const PlanarCurve& c) {
  std::vector<double> x(c.points.size()), y(c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    x[i] = c.points[i].x;
    y[i] = c.points[i].y;
  }
  return json{{"psi_plus", c.angles.psi_plus}, {"psi_minus", c.angles.psi_minus},
              {"x_left", c.x_left},           {"theta", c.theta},
              {"x", x},                       {"y", y}};
}

inline PlanarCurve curve_from_json(const json& j) {
  try {
    PlanarCurve c;
    c.angles = {j.at("psi_plus").get<double>(), j.at("psi_minus").get<double>()};
    c.x_left = j.at("x_left").get<double>();
    c.theta = j.at("theta").get<std::vector<double>>();
    const auto x = j.at("x").get<std::vector<double>>();
    const auto y = j.at("y").get<std::vector<double>>();
    if (x.size() != y.size() || x.size() != c.theta.size())
      throw ConfigError("curve arrays theta/x/y differ in length");
    c.points.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c.points[i] = {x[i], y[i]};
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed curve: ") + e.what());
  }
}

/// Snapshot of the angle-parameterized solver: the curve plus t and, as an
/// extension, the curvature at every vertex (aligned with "theta", so it runs
/// from the left endpoint to the right one).
inline json snapshot_json(double t, const CurvatureProfile& p, double x_left) {
  json j = to_json(reconstruct_curve(p, x_left));
  j["t"] = t;
  j["kappa"] = std::vector<double>(p.kappa.rbegin(), p.kappa.rend());
  return j;
}

inline json to_json(const TravelingWave& w) {
  return json{{"psi_plus", w.angles.psi_plus}, {"psi_minus", w.angles.psi_minus},
              {"c", w.c},                      {"length", w.length},
              {"area", w.area},                {"theta", w.profile.grid},
              {"kappa", w.profile.kappa}};
}

inline json to_json(const AngleFlowState& s) {
  return json{{"tau", s.tau},       {"t", s.t},     {"eta", s.eta},
              {"x_left", s.x_left}, {"z", s.z},     {"v", s.v},
              {"psi_plus", s.angles.psi_plus}, {"psi_minus", s.angles.psi_minus}};
}

inline AngleFlowState angle_state_from_json(const json& j) {
  try {
    AngleFlowState s;
    s.angles = {j.at("psi_plus").get<double>(), j.at("psi_minus").get<double>()};
    s.v = j.at("v").get<std::vector<double>>();
    s.z = j.contains("z") ? j.at("z").get<std::vector<double>>() : unit_grid(s.v.size() - 1);
    if (s.z.size() != s.v.size()) throw ConfigError("angle state arrays z/v differ in length");
    s.eta = j.value("eta", 0.0);
    s.tau = j.value("tau", 0.0);
    s.t = j.value("t", 0.0);
    s.x_left = j.value("x_left", 0.0);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed angle state: ") + e.what());
  }
}

/// A curvature profile stored as {"psi_plus", "psi_minus", "theta", "kappa"}
/// (the wave and snapshot documents both qualify). theta may run in either
/// direction.
inline CurvatureProfile profile_from_json(const json& j) {
  try {
    ContactAngles a{j.at("psi_plus").get<double>(), j.at("psi_minus").get<double>()};
    auto theta = j.at("theta").get<std::vector<double>>();
    auto kappa = j.at("kappa").get<std::vector<double>>();
    if (theta.size() >= 2 && theta.front() > theta.back()) {
      std::reverse(theta.begin(), theta.end());
      std::reverse(kappa.begin(), kappa.end());
    }
    return CurvatureProfile(a, std::move(theta), std::move(kappa));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed curvature profile: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

inline const char* diagnostics_header() {
  return "t,L,A,E,F1,F2,F_tilde,holder_gap,sup_kappa,inf_kappa,max_abs_kappa_theta,"
         "kappa_dist_to_wave,hausdorff_to_wave,shift_to_wave,simplicity_flag";
}

inline std::string csv_row(const DiagnosticsRecord& r) {
  std::string s;
  for (double v : {r.t, r.L, r.A, r.E, r.F1, r.F2, r.F_tilde, r.holder_gap, r.sup_kappa, r.inf_kappa,
                   r.max_abs_kappa_theta, r.kappa_dist_to_wave, r.hausdorff_to_wave, r.shift_to_wave}) {
    s += format_double(v);
    s += ',';
  }
  s += r.simplicity_flag ? "1" : "0";
  return s;
}

/// Streams records to a CSV file as they are produced.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    out_ << diagnostics_header() << '\n';
  }
  void write(const DiagnosticsRecord& r) { out_ << csv_row(r) << '\n'; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace geoflow::io
