#include <gtest/gtest.h>

#include <random>

#include <wigprop/classical.hpp>

using namespace wigprop;

namespace {

SystemParams harmonic() {
  SystemParams s;
  s.potential.kind = PotentialKind::harmonic;
  s.potential.omega = 2.5;
  return s;
}

SystemParams free_particle() {
  SystemParams s;
  s.potential.kind = PotentialKind::free;
  return s;
}

}  // namespace

TEST(Trajectory, FreeFlight) {
  const SystemParams s = free_particle();
  const TrajectoryResult r = integrate_trajectory(s, {1.0, 2.0}, 3.0, 0.01);
  EXPECT_NEAR(r.traj.r.back().p, 1.0, 1e-14);
  EXPECT_NEAR(r.traj.r.back().q, 2.0 + 3.0 / 0.5, 1e-12);
  EXPECT_NEAR(r.M.pp, 1.0, 1e-14);
  EXPECT_NEAR(r.M.pq, 0.0, 1e-14);
  EXPECT_NEAR(r.M.qp, 3.0 / 0.5, 1e-12);
  EXPECT_NEAR(r.M.qq, 1.0, 1e-14);
}

TEST(Trajectory, HarmonicQuarterPeriod) {
  // r' = (0, 0.1): q(t) = 0.1 cos wt, p(t) = -m w 0.1 sin wt
  const SystemParams s = harmonic();
  const PhasePoint e = classical_endpoint(s, {0.0, 0.1}, pi / 5, default_dt(s));
  EXPECT_NEAR(e.p, -0.125, 1e-8);
  EXPECT_NEAR(e.q, 0.0, 1e-8);
  const TrajectoryResult r = integrate_trajectory(s, {0.0, 0.1}, pi / 5, default_dt(s));
  EXPECT_NEAR(r.M.qp, 1.0 / (0.5 * 2.5), 1e-8);
  EXPECT_NEAR(r.M.pq, -0.5 * 2.5, 1e-8);
}

TEST(Trajectory, SymplecticAndEnergy) {
  const SystemParams s;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> up(-1.0, 1.0), uq(-0.3, 1.5);
  for (int i = 0; i < 20; ++i) {
    const TrajectoryResult r = integrate_trajectory(s, {up(rng), uq(rng)}, 2.0, default_dt(s));
    EXPECT_LT(r.max_det_error, 1e-8);
    EXPECT_LT(r.max_energy_drift, 1e-8);
  }
}

TEST(Trajectory, TimesIncrease) {
  const TrajectoryResult r = integrate_trajectory(SystemParams{}, {0.3, 0.1}, 1.0, 0.013);
  ASSERT_EQ(r.traj.t.size(), r.traj.r.size());
  for (std::size_t i = 1; i < r.traj.t.size(); ++i) EXPECT_GT(r.traj.t[i], r.traj.t[i - 1]);
  EXPECT_NEAR(r.traj.t.back(), 1.0, 1e-12);
}

TEST(Trajectory, FourthOrder) {
  const SystemParams s;
  const PhasePoint r0{0.6, -0.2};
  const double t = 1.0;
  const PhasePoint ref = integrate_orbit(s, r0, t, 64 * 40).y.r;
  auto err = [&](int n) {
    const PhasePoint e = integrate_orbit(s, r0, t, n).y.r;
    return std::hypot(e.p - ref.p, e.q - ref.q);
  };
  const double ratio = err(40) / err(80);
  EXPECT_NEAR(ratio, 16.0, 16.0 * 0.2);
}

TEST(Stability, MatchesFiniteDifferences) {
  const SystemParams s;
  for (PhasePoint r0 : {PhasePoint{0.0, 0.1}, PhasePoint{0.8, -0.3}, PhasePoint{-1.2, 0.5}}) {
    const double t = quarter_period(s);
    const StabilityMatrix M = integrate_trajectory(s, r0, t, default_dt(s)).M;
    const StabilityMatrix F = finite_difference_jacobian(s, r0, t, default_dt(s));
    EXPECT_NEAR(M.pp, F.pp, 1e-5);
    EXPECT_NEAR(M.pq, F.pq, 1e-5);
    EXPECT_NEAR(M.qp, F.qp, 1e-5);
    EXPECT_NEAR(M.qq, F.qq, 1e-5);
  }
}

TEST(Stability, IdentityAtZero) {
  const OrbitEnd e = integrate_orbit(SystemParams{}, {0.3, 0.2}, 0.0, 10);
  EXPECT_EQ(e.y.M.pp, 1.0);
  EXPECT_EQ(e.y.M.qp, 0.0);
  EXPECT_EQ(e.focal, 0);
}

TEST(Stability, HarmonicFocalPoints) {
  // M_qp = sin(wt)/(m w) changes sign every half period
  const SystemParams s = harmonic();
  const double T = 2 * pi / 2.5;
  EXPECT_EQ(integrate_orbit(s, {0.0, 0.1}, 0.4 * T, 400).focal, 0);
  EXPECT_EQ(integrate_orbit(s, {0.0, 0.1}, 0.7 * T, 700).focal, 1);
  EXPECT_EQ(integrate_orbit(s, {0.0, 0.1}, 1.2 * T, 1200).focal, 2);
}

TEST(FrobeniusPerron, DeltaAtZero) {
  const PhaseGrid g(-6, 6, 128, -3.02, 7.22, 128);
  const PropagatorSlice s = classical_propagator(SystemParams{}, {0.0, 0.1}, 0.0, g, 1e-3);
  double mass = 0;
  int nonzero = 0;
  for (double v : s.field.values) {
    mass += v * g.cell_area();
    nonzero += v != 0.0;
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_EQ(nonzero, 1);
  EXPECT_NE(s.field.at(static_cast<int>(g.p.nearest(0.0)), static_cast<int>(g.q.nearest(0.1))), 0.0);
  EXPECT_EQ(s.route, Route::classical);
}

TEST(FrobeniusPerron, HarmonicEndpointCell) {
  const SystemParams s = harmonic();
  const PhaseGrid g(-3.125, 3.175, 21, -2.4, 2.64, 21);
  const PropagatorSlice sl = classical_propagator(s, {0.0, 0.1}, pi / 5, g, default_dt(s));
  const int i = static_cast<int>(g.p.nearest(-0.125)), j = static_cast<int>(g.q.nearest(0.0));
  EXPECT_NEAR(sl.field.at(i, j) * g.cell_area(), 1.0, 1e-12);
}

TEST(FrobeniusPerron, Errors) {
  const PhaseGrid g(-1, 1, 8, -1, 1, 8);
  EXPECT_THROW(classical_propagator(SystemParams{}, {0.0, 3.0}, 0.1, g, 1e-3), ConfigError);
  EXPECT_THROW(classical_propagator(free_particle(), {0.5, 0.0}, 10.0, g, 1e-2), NumericError);
  EXPECT_THROW(integrate_trajectory(SystemParams{}, {0, 0}, 1.0, 0.0), ConfigError);
  EXPECT_THROW(integrate_trajectory(SystemParams{}, {0, 0}, -1.0, 0.1), ConfigError);
}
