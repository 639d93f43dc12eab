#include <gtest/gtest.h>

#include <cmath>

#include "geoflow/experiment.hpp"
#include "geoflow/theta_flow.hpp"
#include "geoflow/traveling_wave.hpp"
#include "test_support.hpp"

using namespace geoflow;
using geoflow::testkit::Gen;
using geoflow::testkit::pi;

namespace {

double sup_diff(const CurvatureProfile& a, const CurvatureProfile& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.kappa.size(); ++i) d = std::max(d, std::abs(a.kappa[i] - b.kappa[i]));
  return d;
}

// Symmetric, closed, non-circular profile.
CurvatureProfile bumpy_symmetric(double psi, std::size_t n) {
  return CurvatureProfile::sample({psi, psi}, n, [](double t) { return -(3.0 + 0.4 * std::cos(2 * t)); });
}

}  // namespace

TEST(ThetaFlow, WaveIsStationary) {
  for (auto a : {ContactAngles{pi / 2, pi / 2}, ContactAngles{pi / 3, 2 * pi / 3}, ContactAngles{2.0, 1.1}}) {
    const auto w = build_wave(a, 128);
    EvolveOptions eo;
    eo.stride = 50;
    double worst = 0;
    eo.on_snapshot = [&](const ThetaFlowState& s) { worst = std::max(worst, sup_diff(s.profile, w.profile)); };
    const auto traj = evolve({w.profile, 0.0, 0.0, 0}, 0.05, eo);
    EXPECT_LE(worst, 1e-10);
    // The left endpoint slides with the wave speed.
    EXPECT_NEAR(traj.back().x_left, w.c * 0.05, 1e-9);
  }
}

TEST(ThetaFlow, ArcIsStationary) {
  const auto p = CurvatureProfile::sample({1.1, 1.1}, 64, [](double) { return -2.2; });
  const auto traj = evolve({p, 0.0, 0.0, 0}, 0.1);
  EXPECT_LE(sup_diff(traj.back().profile, p), 1e-12);
  EXPECT_NEAR(traj.back().x_left, 0.0, 1e-12);
}

TEST(ThetaFlow, BoundaryConditionsHoldAfterEachStep) {
  Gen g(31);
  const auto a = g.angles(0.8, 2.2);
  ThetaFlowState s{g.concave_profile(a, 64), 0.0, 0.0, 0};
  for (int k = 0; k < 20; ++k) {
    auto [next, rep] = step(s, 1.0);
    EXPECT_LE(std::abs(rep.boundary_residual_left), 1e-12);
    EXPECT_LE(std::abs(rep.boundary_residual_right), 1e-12);
    const auto [bl, br] = boundary_condition_residual(next);
    EXPECT_LE(std::abs(bl), 1e-9);
    EXPECT_LE(std::abs(br), 1e-9);
    s = next;
  }
}

TEST(ThetaFlow, StepRespectsStabilityLimit) {
  const auto p = bumpy_symmetric(1.0, 64);
  const double lim = stable_dt(p, 0.5);
  const double h = p.spacing();
  EXPECT_NEAR(lim, 0.5 * 3 * h * h / (8 * 3.4 * 3.4), 1e-15);
  auto [s1, r1] = step({p, 0.0, 0.0, 0}, 1.0);
  EXPECT_DOUBLE_EQ(r1.dt_used, lim);
  auto [s2, r2] = step({p, 0.0, 0.0, 0}, 0.1 * lim);
  EXPECT_DOUBLE_EQ(r2.dt_used, 0.1 * lim);
  EXPECT_EQ(s2.step_count, 1u);
  EXPECT_THROW(step({p, 0.0, 0.0, 0}, 0.0), DomainError);
}

TEST(ThetaFlow, SymmetricDataStaysSymmetric) {
  const auto p = bumpy_symmetric(1.3, 64);
  const auto traj = evolve({p, 0.0, 0.0, 0}, 0.02);
  const auto& k = traj.back().profile.kappa;
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_NEAR(k[i], k[k.size() - 1 - i], 1e-12);
}

TEST(ThetaFlow, AreaConservedAndLengthDecreases) {
  // Initial data compatible with the boundary conditions.
  const auto p = perturb_wave(build_wave({1.0, 1.5}, 128), 0.05, 2).profile;
  EvolveOptions eo;
  eo.stride = 20;
  const auto traj = evolve({p, 0.0, 0.0, 0}, 0.05, eo);
  const double A0 = signed_area(traj.front().profile);
  double Lprev = length_of(traj.front().profile);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    EXPECT_NEAR(signed_area(traj[k].profile), A0, 1e-6 * A0);
    const double L = length_of(traj[k].profile);
    EXPECT_LE(L, Lprev + 1e-12);
    EXPECT_GE(L, std::sqrt(2 * pi * A0) - 1e-9);
    Lprev = L;
  }
}

TEST(ThetaFlow, EndpointConstraintIsPreserved) {
  const auto w = build_wave({1.0, 1.7}, 128);
  auto p = w.profile;
  for (std::size_t i = 0; i < p.kappa.size(); ++i) p.kappa[i] *= 1.0 + 0.02 * std::cos(2.0 * p.grid[i] + 1.0);
  // Restore the constraint with a sin(theta) correction.
  double lo = -1, hi = 1;
  auto fixed = [&](double d) {
    auto q = p;
    for (std::size_t i = 0; i < q.kappa.size(); ++i) q.kappa[i] *= 1.0 + d * std::sin(q.grid[i]);
    return q;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((endpoint_residual(fixed(mid)) > 0) == (endpoint_residual(fixed(lo)) > 0) ? lo : hi) = mid;
  }
  const auto q = fixed(lo);
  ASSERT_LE(std::abs(endpoint_residual(q)), 1e-13);
  const auto traj = evolve({q, 0.0, 0.0, 0}, 0.02);
  EXPECT_LE(std::abs(endpoint_residual(traj.back().profile)), 1e-5);
}

TEST(Evolve, SnapshotBookkeeping) {
  const auto w = build_wave({1.2, 1.4}, 64);
  EvolveOptions eo;
  eo.stride = 7;
  std::size_t steps = 0;
  eo.on_step = [&](const ThetaFlowState&, const StepReport&) { ++steps; };
  const auto traj = evolve({w.profile, 0.25, 0.0, 0}, 0.26, eo);
  EXPECT_EQ(traj.front().t, 0.25);
  EXPECT_EQ(traj.back().t, 0.26);
  for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_GT(traj[k].t, traj[k - 1].t);
  EXPECT_EQ(traj.size(), 1 + (steps + 6) / 7);
}

TEST(Evolve, ZeroLengthIntervalAndErrors) {
  const auto w = build_wave({1.2, 1.4}, 64);
  const ThetaFlowState s{w.profile, 1.0, 0.0, 0};
  EXPECT_EQ(evolve(s, 1.0).size(), 1u);
  EXPECT_THROW(evolve(s, 0.5), DomainError);
  EvolveOptions eo;
  eo.stride = 0;
  EXPECT_THROW(evolve(s, 2.0, eo), DomainError);
  auto bad = w.profile;
  bad.kappa[10] = 0.5;
  EXPECT_THROW(evolve({bad, 0.0, 0.0, 0}, 1.0), ConcavityError);
}

TEST(Evolve, ConcavityLossIsReportedWithLastGoodState) {
  const auto p = bumpy_symmetric(1.0, 64);
  EvolveOptions eo;
  eo.flow.concavity_floor = 3.5;  // above min |kappa| = 2.6: the first step must fail
  try {
    evolve({p, 0.0, 0.0, 0}, 1.0, eo);
    FAIL() << "expected FlowFailure";
  } catch (const FlowFailure& f) {
    EXPECT_TRUE(f.is_concavity_loss());
    EXPECT_EQ(f.last_good().t, 0.0);
    EXPECT_THROW(f.rethrow_cause(), ConcavityError);
  }
}

TEST(Evolve, DeterministicForFixedInput) {
  const auto p = bumpy_symmetric(0.9, 64);
  const auto a = evolve({p, 0.0, 0.0, 0}, 0.01);
  const auto b = evolve({p, 0.0, 0.0, 0}, 0.01);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.back().profile.kappa, b.back().profile.kappa);
  EXPECT_EQ(a.back().x_left, b.back().x_left);
}
