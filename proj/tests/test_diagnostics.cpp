#include <gtest/gtest.h>

#include <cmath>

#include "geoflow/diagnostics.hpp"
#include "test_support.hpp"

using namespace geoflow;
using geoflow::testkit::Gen;
using geoflow::testkit::pi;

namespace {

// Independent energy: chord length plus the wetting terms, from the polyline.
double energy_oracle(const PlanarCurve& c) {
  double L = 0;
  for (std::size_t k = 1; k < c.points.size(); ++k)
    L += std::hypot(c.points[k].x - c.points[k - 1].x, c.points[k].y - c.points[k - 1].y);
  return L - c.points.back().x * std::cos(c.angles.psi_plus) + c.points.front().x * std::cos(c.angles.psi_minus);
}

// Closed symmetric non-circular profile.
CurvatureProfile bumpy(double psi, std::size_t n, double amp = 0.4) {
  return CurvatureProfile::sample({psi, psi}, n, [=](double t) { return -(3.0 + amp * std::cos(2 * t)); });
}

}  // namespace

TEST(Energy, TranslationLaw) {
  Gen g(51);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = g.angles();
    const auto p = g.concave_profile(a, 128);
    const auto c0 = reconstruct_curve(p, 0.0);
    for (double s : {-1.0, 0.3, 7.0}) {
      const double jump = energy(translate(c0, s)) - energy(c0);
      EXPECT_NEAR(jump, s * (std::cos(a.psi_minus) - std::cos(a.psi_plus)), 1e-12);
    }
  }
}

TEST(Energy, PolylineAndProfileAgree) {
  Gen g(52);
  const auto a = g.angles();
  const auto p = g.concave_profile(a, 1024);
  const auto c = reconstruct_curve(p, 0.4);
  EXPECT_DOUBLE_EQ(energy(c), energy_oracle(c));
  EXPECT_NEAR(energy(p, 0.4), energy(c), 1e-5);
  EXPECT_THROW(energy(PlanarCurve{}), DomainError);
}

TEST(Energy, SemicircleValue) {
  // cos(pi/2) = 0 removes the wetting terms: E = L.
  const auto p = CurvatureProfile::sample({pi / 2, pi / 2}, 64, [](double) { return -pi; });
  EXPECT_NEAR(energy(p, 3.0), 1.0, 1e-12);
  EXPECT_NEAR(energy_dissipation(p), 0.0, 1e-12);
}

TEST(Lyapunov, VanishesOnTravelingWaves) {
  for (auto a : {ContactAngles{pi / 2, pi / 2}, ContactAngles{pi / 3, 2 * pi / 3}, ContactAngles{1.9, 1.1}}) {
    const auto w = build_wave(a, 256);
    const auto lv = lyapunov(w.profile);
    EXPECT_LE(std::abs(lv.F_tilde), 1e-8 * lv.weight * (std::abs(lv.F1) + std::abs(lv.F2))) << a.psi_plus;
  }
}

TEST(Lyapunov, HomogeneousOfDegreeTwo) {
  // weight ~ lambda^4 and F1 + F2 ~ lambda^-2.
  Gen g(53);
  const auto p = g.concave_profile(g.angles(), 128);
  const double F = lyapunov(p).F_tilde;
  for (double lam : {0.3, 4.0})
    EXPECT_NEAR(lyapunov(scale_profile(p, lam)).F_tilde, lam * lam * F, 1e-10 * lam * lam * std::abs(F));
}

TEST(Lyapunov, ConstantAlongWaveEvolution) {
  const auto w = build_wave({pi / 3, 2 * pi / 3}, 128);
  EvolveOptions eo;
  eo.stride = 200;
  const auto traj = evolve({w.profile, 0.0, 0.0, 0}, 1.0, eo);
  const double F0 = lyapunov(traj.front().profile).F_tilde;
  const auto lv = lyapunov(traj.front().profile);
  const double scale = lv.weight * (std::abs(lv.F1) + std::abs(lv.F2));
  for (const auto& s : traj) EXPECT_LE(std::abs(lyapunov(s.profile).F_tilde - F0), 1e-5 * std::max(std::abs(F0), scale));
}

TEST(Lyapunov, RejectsNonConcave) {
  auto p = bumpy(1.0, 32);
  p.kappa[4] = 0.0;
  EXPECT_THROW(lyapunov(p), ConcavityError);
}

TEST(HolderGap, NonnegativeForRandomData) {
  Gen g(54);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = g.concave_profile(g.angles(), 2 * static_cast<std::size_t>(g.integer(8, 64)));
    std::vector<double> kt(p.kappa.size());
    for (auto& x : kt) x = g.uniform(-5, 5);
    EXPECT_GE(holder_gap(p, kt).raw, -1e-12);
  }
}

TEST(HolderGap, ZeroExactlyWhenRateProportionalToKappa) {
  Gen g(55);
  const auto p = g.concave_profile(g.angles(), 64);
  std::vector<double> kt(p.kappa);
  for (auto& x : kt) x *= -0.7;
  const auto gap = holder_gap(p, kt);
  EXPECT_NEAR(gap.raw, 0.0, 1e-13);
  EXPECT_GE(gap.value, 0.0);
  EXPECT_THROW(holder_gap(p, std::vector<double>(3, 0.0)), DomainError);
}

TEST(HolderGap, MatchesDirectDefinition) {
  const auto p = bumpy(1.2, 64);
  std::vector<double> kt(p.kappa.size());
  for (std::size_t i = 0; i < kt.size(); ++i) kt[i] = std::sin(3 * p.grid[i]);
  // Independent quadrature of the two integrals.
  auto r = [&](double t) { return std::sin(3 * t) / -(3.0 + 0.4 * std::cos(2 * t)); };
  const double a = testkit::adaptive_simpson([&](double t) { return r(t) * r(t); }, -1.2, 1.2, 1e-13);
  const double b = testkit::adaptive_simpson(r, -1.2, 1.2, 1e-13);
  EXPECT_NEAR(holder_gap(p, kt).raw, a - b * b / 2.4, 1e-6);
}

TEST(LyapunovIdentity, DerivativeMatchesWeightedGap) {
  // dF~/dt = weight * gap along the flow, by central differences in time.
  const ContactAngles a{1.0, 1.4};
  const auto w = build_wave(a, 256);
  auto p = w.profile;
  for (std::size_t i = 0; i < p.kappa.size(); ++i) p.kappa[i] *= 1.0 + 0.05 * std::cos(2 * p.grid[i]);
  const auto snap = evolve({p, 0.0, 0.0, 0}, 0.002).back();  // past the initial boundary layer
  const ThetaFlowState s{snap.profile, snap.t, snap.x_left, 0};
  const double dt = 0.25 * stable_dt(s.profile, 0.5);
  ThetaFlowOptions o;
  const auto fwd = step(s, dt, o).first;
  const auto fwd2 = step(fwd, dt, o).first;
  const double dF = (lyapunov(fwd2.profile).F_tilde - lyapunov(s.profile).F_tilde) / (fwd2.t - s.t);
  const double res = lyapunov_identity_residual(fwd.profile, interior_rhs(fwd.profile), dF);
  EXPECT_LE(res, 2e-2 * std::abs(dF) + 1e-8);
  EXPECT_GE(dF, 0.0);
}

TEST(Stationarity, VanishesOnWaveOnly) {
  const auto w = build_wave({pi / 3, 2 * pi / 3}, 256);
  const auto st = stationarity_residual(w.profile);
  EXPECT_LE(st.residual, 1e-8);
  EXPECT_NEAR(st.alpha_hat, 0.0, 1e-8);
  EXPECT_GT(stationarity_residual(bumpy(1.0, 256)).residual, 1e-2);
}

TEST(Support, SecondOrderIdentity) {
  auto order = [](auto make) {
    const double r1 = support_identity_residual(make(128));
    const double r2 = support_identity_residual(make(256));
    return std::log2(r1 / r2);
  };
  EXPECT_GE(order([](std::size_t n) { return build_wave({pi / 3, 2 * pi / 3}, n).profile; }), 1.9);
  EXPECT_GE(order([](std::size_t n) { return bumpy(1.1, n); }), 1.9);
}

TEST(Support, AreaMatchesSignedArea) {
  const auto p = bumpy(1.1, 512);
  EXPECT_NEAR(area_from_support(p), signed_area(p), 1e-8);
  const auto w = build_wave({0.9, 1.6}, 512);
  EXPECT_NEAR(area_from_support(w.profile), w.area, 1e-8);
}

TEST(Monitor, WaveRunHasNoViolations) {
  const auto w = build_wave({pi / 3, 2 * pi / 3}, 128);
  EvolveOptions eo;
  eo.stride = 100;
  const auto traj = evolve({w.profile, 0.0, 0.0, 0}, 0.05, eo);
  const auto recs = monitor(traj, w);
  ASSERT_EQ(recs.size(), traj.size());
  for (const auto& r : recs) {
    EXPECT_LE(r.kappa_dist_to_wave, 1e-9);
    EXPECT_LE(r.hausdorff_to_wave, 1e-8);
    EXPECT_NEAR(r.shift_to_wave, 0.0, 1e-6);
    EXPECT_TRUE(r.simplicity_flag);
    EXPECT_NEAR(r.A, w.area, 1e-10);
  }
}

TEST(Monitor, StatsTrackViolations) {
  const auto w = build_wave({1.2, 1.2}, 64);
  Monitor m(w, {false, 1e-6});
  m.observe(0.0, w.profile, 0.0);
  // A bigger curve later: area drifts, energy increases.
  m.observe(1.0, scale_profile(w.profile, 1.1), 0.0);
  const auto& s = m.stats();
  EXPECT_EQ(s.records, 2u);
  EXPECT_NEAR(s.max_rel_area_drift, 0.21, 1e-9);
  EXPECT_EQ(s.area_flags, 1u);
  EXPECT_GT(s.max_energy_increase, 0.0);
  EXPECT_TRUE(m.records().back().area_flag);
  EXPECT_THROW(m.observe(2.0, bumpy(1.2, 32), 0.0), DomainError);
}

TEST(Monitor, EnergyDissipationRateMatches) {
  const ContactAngles a{1.0, 1.6};
  const auto w = build_wave(a, 256);
  auto p = w.profile;
  for (std::size_t i = 0; i < p.kappa.size(); ++i) p.kappa[i] *= 1.0 + 0.04 * std::cos(3 * p.grid[i] + 0.5);
  const auto snap = evolve({p, 0.0, 0.0, 0}, 0.002).back();
  const ThetaFlowState s{snap.profile, snap.t, snap.x_left, 0};
  EvolveOptions eo;
  eo.stride = 10;
  const auto traj = evolve(s, s.t + 0.01, eo);
  Monitor m(w, {false, 1.0});
  for (const auto& q : traj) m.observe(q.t, q.profile, q.x_left);
  EXPECT_LE(m.stats().max_dissipation_defect, 1e-2);
  EXPECT_EQ(m.stats().max_energy_increase, 0.0);
}

TEST(ExponentialFit, RecoversRate) {
  std::vector<double> t, y;
  for (int k = 0; k < 40; ++k) {
    t.push_back(0.5 * k);
    y.push_back(3.0 * std::exp(-1.3 * t.back()));
  }
  const auto f = fit_exponential_tail(t, y);
  EXPECT_NEAR(f.slope, -1.3, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_EQ(f.samples, 20u);
}

TEST(ExponentialFit, SkipsNonpositiveAndShortInput) {
  std::vector<double> t{0, 1, 2, 3}, y{1, 0, -1, 2};
  EXPECT_EQ(fit_exponential_tail(t, y, 1.0).samples, 2u);
  EXPECT_EQ(fit_exponential_tail(t, y, 1.0).slope, 0.0);
}
