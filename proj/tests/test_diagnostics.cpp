#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace icqnls;
using namespace icqnls::testing;

namespace {

const double kPi32 = std::pow(kPi, 1.5);

Trajectory run(const ComplexField& phi, const CoefficientSpec& c, double dt, double t_end, DiagnosticsOptions opts = {}) {
  StepperConfig cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  return strang_evolve(phi, c, cfg, make_recorder(phi.grid_ptr(), c, opts));
}

}  // namespace

TEST(Variance, Gaussian) {
  auto phi = gaussian(make_grid(64, 8.0, true));
  EXPECT_NEAR(variance(phi), 1.5 * kPi32, 1e-6);
}

TEST(Variance, FreeGaussianSpreads) {
  auto g = make_grid(96, 16.0, true);
  auto phi = gaussian(g);
  for (double t : {0.5, 1.0}) {
    const double want = 1.5 * kPi32 * (1.0 + 4.0 * t * t);
    EXPECT_NEAR(variance(free_propagate(phi, t)) / want, 1.0, 1e-5);
  }
}

TEST(Variance, ParallelAxis) {
  auto g = make_grid(64, 10.0, true);
  const double a[3] = {0.7, -0.4, 0.2};
  auto shifted = ComplexField::from_function(g, [&](double x, double y, double z) {
    const double dx = x - a[0], dy = y - a[1], dz = z - a[2];
    return cplx{std::exp(-(dx * dx + dy * dy + dz * dz) / 2.0), 0.0};
  });
  auto phi = gaussian(g);
  const double a2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
  EXPECT_NEAR(variance(shifted) / (variance(phi) + a2 * mass(phi)), 1.0, 1e-8);
}

TEST(Dilation, RealFieldIsZero) {
  auto phi = gaussian(make_grid(32, 8.0, true), 1.3, 0.9);
  EXPECT_NEAR(dilation_A(phi), 0.0, 1e-12);
}

TEST(Dilation, FreeGaussianLinearInTime) {
  auto g = make_grid(96, 16.0, true);
  auto phi = gaussian(g);
  for (double t : {0.25, 1.0}) EXPECT_NEAR(dilation_A(free_propagate(phi, t)) / (3.0 * kPi32 * t), 1.0, 1e-6);
}

TEST(Dilation, BoostedCenteredFieldIsZero) {
  auto g = make_grid(64, 8.0, true);
  auto f = ComplexField::from_function(g, [](double x, double y, double z) {
    return std::polar(std::exp(-(x * x + y * y + z * z) / 2.0), 0.6 * x - 0.3 * y + 0.2 * z);
  });
  EXPECT_NEAR(dilation_A(f), 0.0, 1e-10);
}

TEST(Galilean, ReducesToVarianceAtZero) {
  auto phi = gaussian(make_grid(32, 8.0, true));
  EXPECT_EQ(galilean_norm(phi, 0.0), variance(phi));
}

TEST(Galilean, CommutesWithFreeFlow) {
  auto g = make_grid(96, 16.0, true);
  auto f = ComplexField::from_function(g, [](double x, double y, double z) {
    return cplx{1.0 + 0.3 * x, 0.2 * y} * std::exp(-(x * x + y * y + z * z) / 2.0);
  });
  for (double t : {0.3, 0.8}) EXPECT_NEAR(galilean_norm(free_propagate(f, t), t) / variance(f), 1.0, 1e-8);
}

TEST(Galilean, RealGaussianExpansion) {
  auto phi = gaussian(make_grid(64, 8.0, true));
  const double t = 0.4;
  EXPECT_NEAR(galilean_norm(phi, t) / (variance(phi) + 4.0 * t * t * grad_norm2(phi)), 1.0, 1e-8);
}

TEST(Recorder, PopulatesFields) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g);
  const CoefficientSpec c{1.0, 0.5, 1.0, 1.0};
  auto r = make_recorder(g, c, {true})(0.0, phi);
  EXPECT_NEAR(r.mass, mass(phi), 1e-12);
  EXPECT_NEAR(r.energy, energy(phi, c), 1e-12);
  EXPECT_NEAR(r.potential, potential_energy(phi, c), 1e-12);
  EXPECT_NEAR(r.hl11_norm, angular_sobolev_norm(phi, 1, 1).value, 1e-10);
  EXPECT_EQ(r.galilean_norm2, r.variance);
  EXPECT_TRUE(std::isnan(make_recorder(g, c)(0.0, phi).hl11_norm));
}

TEST(Residuals, VacuumIsZero) {
  auto traj = run(ComplexField(make_grid(8, 4.0, true)), CoefficientSpec{1.0, 0.5, 1.0, 1.0}, 0.1, 0.5);
  for (double r : virial_residual(traj.records)) EXPECT_EQ(r, 0.0);
  for (double r : dilation_identity_residual(traj.records, CoefficientSpec{})) EXPECT_EQ(r, 0.0);
}

TEST(Residuals, FreeGaussianIdentities) {
  auto phi = gaussian(make_grid(64, 16.0, true));
  auto traj = run(phi, CoefficientSpec{}, 1e-3, 1.0);
  fill_residuals(traj.records, CoefficientSpec{});
  double v = 0, d = 0, p = 0;
  for (const auto& r : traj.records) {
    v = std::max(v, std::abs(r.virial_residual));
    d = std::max(d, std::abs(r.dilation_residual));
    p = std::max(p, std::abs(r.pconf_residual));
  }
  EXPECT_LT(v, 1e-4);
  EXPECT_LT(d, 1e-5);
  EXPECT_LT(p, 1e-6);
}

TEST(Residuals, CriticalCubicWeightKillsCorrection) {
  auto phi = gaussian(make_grid(64, 12.0, true));
  const CoefficientSpec c{1.0, 1.0, 0.0, 0.0};
  auto traj = run(phi, c, 1e-3, 0.5);
  const auto res = dilation_identity_residual(traj.records, c);
  double m = 0;
  for (double r : res) m = std::max(m, std::abs(r));
  EXPECT_LT(m, 1e-3);
}

TEST(Residuals, ConformalWeightsKeepGalileanEnergyConstant) {
  auto phi = gaussian(make_grid(64, 12.0, true));
  const CoefficientSpec c{1.0, 1.0, 1.0, 4.0};
  auto traj = run(phi, c, 1e-3, 0.5);
  const auto& r0 = traj.records.front();
  const double lhs0 = r0.galilean_norm2;
  double drift = 0;
  for (const auto& r : traj.records)
    drift = std::max(drift, std::abs(r.galilean_norm2 + 8.0 * r.t * r.t * r.potential - lhs0) / lhs0);
  EXPECT_LT(drift, 1e-3);
}

TEST(Concavity, FreeFlowHoldsAndStartsAtZero) {
  auto phi = gaussian(make_grid(64, 16.0, true));
  auto traj = run(phi, CoefficientSpec{}, 0.01, 1.0);
  auto chk = concavity_check(traj.records, blowup_params_from(traj.records.front(), 0.0));
  EXPECT_EQ(chk.margin.front(), 0.0);
  // the bound is attained by the free Gaussian, so the margin sits at roundoff
  EXPECT_GE(chk.min_margin, -1e-9 * traj.records.front().variance);
}

TEST(DecayFit, ClosedFormFreeDecay) {
  // V(t) = ¼(π/2)^{3/2}(1 + 4t²)^{-3/2} for the free Gaussian with b1 = 0
  std::vector<DiagnosticRecord> recs;
  for (int i = 0; i <= 200; ++i) {
    DiagnosticRecord r;
    r.t = std::exp(std::log(16.0) + i * (std::log(256.0) - std::log(16.0)) / 200.0);
    r.potential = 0.25 * std::pow(kPi / 2.0, 1.5) * std::pow(1.0 + 4.0 * r.t * r.t, -1.5);
    recs.push_back(r);
  }
  auto fit = potential_decay_fit(recs, 16.0, 256.0);
  ASSERT_TRUE(fit.valid);
  EXPECT_NEAR(fit.slope, -1.0, 1e-3);
  EXPECT_EQ(fit.samples, 201u);
}

TEST(DecayFit, Rejections) {
  std::vector<DiagnosticRecord> recs(20);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].t = 1.0 + 0.1 * static_cast<double>(i);
  EXPECT_THROW(potential_decay_fit(recs, 0.5, 2.0), ParameterError);
  EXPECT_THROW(potential_decay_fit(recs, 1.0, 1.3), InsufficientDataError);
  auto fit = potential_decay_fit(recs, 1.0, 2.9);
  EXPECT_FALSE(fit.valid);
  EXPECT_NE(fit.reason.find("insufficient signal"), std::string::npos);
}

TEST(Scattering, LinearFlowHasNoGaps) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g, 1.0, 0.8);
  std::vector<double> times{0.0, 0.5, 1.0, 2.0};
  std::vector<ComplexField> snaps;
  for (double t : times) snaps.push_back(free_propagate(phi, t));
  auto m = scattering_monitor(times, snaps);
  EXPECT_TRUE(std::isnan(m.gap_l2.front()));
  for (std::size_t i = 1; i < times.size(); ++i) {
    EXPECT_LT(m.gap_l2[i], 1e-10);
    EXPECT_LT(m.gap_hl11[i], 1e-10);
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_LT(m.dist_l2[i], 1e-10);
    EXPECT_NEAR(m.overlap_H[i], 0.0, 1e-12);
  }
  EXPECT_LT(rel_diff(m.phi_plus, phi), 1e-12);
}

TEST(Scattering, InputValidation) {
  auto phi = gaussian(make_grid(8, 4.0, true));
  EXPECT_THROW(scattering_monitor({0.0, 1.0}, {phi}), UsageError);
  EXPECT_THROW(scattering_monitor({}, {}), InsufficientDataError);
}

TEST(SpaceTime, AdmissibilityFlag) {
  EXPECT_TRUE(SpaceTimeNormSpec(10.0, 30.0 / 13.0).admissible);
  EXPECT_TRUE(SpaceTimeNormSpec(2.0, 6.0).admissible);
  EXPECT_TRUE(SpaceTimeNormSpec(kInf, 2.0).admissible);
  EXPECT_FALSE(SpaceTimeNormSpec(4.0, 4.0).admissible);
  EXPECT_THROW(SpaceTimeNormSpec(1.0, 6.0), ParameterError);
}

TEST(SpaceTime, SupOfMassAndStrichartzSample) {
  auto g = make_grid(48, 12.0, true);
  auto phi = gaussian(g);
  std::vector<double> times;
  std::vector<ComplexField> snaps;
  for (int i = 0; i <= 20; ++i) {
    times.push_back(0.05 * i);
    snaps.push_back(free_propagate(phi, times.back()));
  }
  EXPECT_NEAR(spacetime_norm(times, snaps, {kInf, 2.0}).value, std::sqrt(mass(phi)), 1e-10);
  auto s = spacetime_norm(times, snaps, {2.0, 6.0});
  EXPECT_TRUE(s.admissible);
  EXPECT_TRUE(std::isfinite(s.value));
  EXPECT_GT(s.value, 0.0);
  EXPECT_LT(s.value, std::sqrt(mass(phi)));
  EXPECT_THROW(spacetime_norm({0.0}, {phi}, {2.0, 6.0}), InsufficientDataError);
}
