#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

using namespace icqnls;
using namespace icqnls::testing;

namespace {

// e^{itΔ}e^{-|x|²/2} = (1+2it)^{-3/2} e^{-|x|²/(2(1+2it))}
ComplexField free_gaussian(const GridPtr& g, double t) {
  const cplx q{1.0, 2.0 * t};
  const cplx pre = std::pow(q, -1.5);
  return ComplexField::from_function(g, [&](double x, double y, double z) {
    return pre * std::exp(-(x * x + y * y + z * z) / (2.0 * q));
  });
}

const CoefficientSpec kDefocusing{1.0, 0.5, 1.0, 1.0};

}  // namespace

TEST(FreePropagate, IdentityAtZero) {
  auto phi = gaussian(make_grid(16, 6.0, true));
  EXPECT_LT(max_abs_diff(free_propagate(phi, 0.0), phi), 1e-15);
}

TEST(FreePropagate, ClosedFormGaussian) {
  auto g = make_grid(96, 16.0, true);
  auto phi = gaussian(g);
  for (double t : {0.25, 1.0}) EXPECT_LT(max_abs_diff(free_propagate(phi, t), free_gaussian(g, t)), 1e-8);
}

TEST(FreePropagate, GroupInverseAndUnitarity) {
  auto g = make_grid(32, 6.0, true);
  auto phi = gaussian(g, 1.0, 0.8);
  auto fwd = free_propagate(phi, 0.7);
  EXPECT_NEAR(l2_norm(fwd) / l2_norm(phi), 1.0, 1e-12);
  EXPECT_LT(rel_diff(free_propagate(fwd, -0.7), phi), 1e-12);
  EXPECT_LT(rel_diff(free_propagate(free_propagate(phi, 0.3), 0.4), fwd), 1e-12);
}

TEST(NonlinearPhase, ZeroStepAndModulus) {
  auto g = make_grid(16, 4.0, true);
  auto u = gaussian(g, 1.5, 1.0);
  EXPECT_LT(max_abs_diff(nonlinear_phase_step(u, 0.0, kDefocusing), u), 1e-15);
  auto v = nonlinear_phase_step(u, 0.37, kDefocusing);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(std::abs(v[i]), std::abs(u[i]), 1e-14 * std::abs(u[i]) + 1e-300);
}

TEST(NonlinearPhase, ScalarOde) {
  auto g = make_grid(8, 1.0, false);
  auto one = ComplexField::from_function(g, [](double, double, double) { return cplx{1.0, 0.0}; });
  auto v = nonlinear_phase_step(one, kPi, CoefficientSpec{1.0, 0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(v[i] - cplx{-1.0, 0.0}), 1e-14);
}

TEST(Strang, LinearFlowIsExact) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g);
  StepperConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.5;
  auto traj = strang_evolve(phi, CoefficientSpec{}, cfg);
  EXPECT_EQ(traj.status, RunStatus::completed);
  EXPECT_EQ(traj.steps, 50u);
  EXPECT_DOUBLE_EQ(traj.final_time, 0.5);
  EXPECT_LT(rel_diff(traj.final_state, free_propagate(phi, 0.5)), 1e-10);
}

TEST(Strang, MassConservedOverThousandSteps) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g);
  StepperConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  auto traj = strang_evolve(phi, kDefocusing, cfg);
  ASSERT_EQ(traj.steps, 1000u);
  EXPECT_LT(std::abs(mass(traj.final_state) - mass(phi)) / mass(phi), 1e-10);
}

TEST(Strang, SecondOrderEnergyDrift) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g);
  const CoefficientSpec c{1.0, 2.0, 1.0, 4.0};
  const double e0 = energy(phi, c);
  auto drift = [&](double dt) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 1.0;
    return std::abs(energy(strang_evolve(phi, c, cfg).final_state, c) - e0);
  };
  const double r = drift(0.02) / drift(0.01);
  EXPECT_GT(r, 3.0);
  EXPECT_LT(r, 5.0);
}

TEST(Strang, RecordsSnapshotsAndObservers) {
  auto g = make_grid(16, 6.0, true);
  auto phi = gaussian(g, 0.5, 1.0);
  StepperConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.105;
  cfg.snapshot_stride = 5;
  cfg.record_stride = 2;
  int seen = 0;
  auto traj = strang_evolve(
      phi, kDefocusing, cfg, [](double t, const ComplexField& u) {
        DiagnosticRecord r;
        r.t = t;
        r.mass = mass(u);
        return r;
      },
      {[&](double, const ComplexField&) { ++seen; }});
  EXPECT_EQ(traj.steps, 11u);
  EXPECT_EQ(seen, 11);
  EXPECT_NEAR(traj.final_time, 0.105, 1e-15);
  ASSERT_EQ(traj.snapshot_times.size(), 3u);
  EXPECT_NEAR(traj.snapshot_times[2], 0.1, 1e-15);
  ASSERT_EQ(traj.records.size(), 7u);
  EXPECT_NEAR(traj.records.back().t, 0.105, 1e-15);
  for (std::size_t i = 1; i < traj.times.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
}

TEST(Strang, ConfigValidation) {
  auto phi = gaussian(make_grid(8, 4.0, true));
  StepperConfig cfg;
  cfg.dt = -1.0;
  EXPECT_THROW(strang_evolve(phi, kDefocusing, cfg), ConfigError);
  cfg.dt = 0.1;
  cfg.adaptive = true;
  cfg.max_phase_per_step = 1.0;
  EXPECT_THROW(strang_evolve(phi, kDefocusing, cfg), ConfigError);
}

TEST(Strang, AdaptiveStepRespectsPhaseCap) {
  auto g = make_grid(16, 4.0, true);
  auto phi = gaussian(g, 2.0, 1.0);
  StepperConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = 0.2;
  cfg.adaptive = true;
  cfg.max_phase_per_step = 0.05;
  auto traj = strang_evolve(phi, kDefocusing, cfg);
  EXPECT_EQ(traj.status, RunStatus::completed);
  EXPECT_NEAR(traj.final_time, 0.2, 1e-12);
  const double rate = max_phase_rate(phi, CoefficientField(g, kDefocusing));
  EXPECT_LE(traj.min_dt_used, 0.05 / rate * (1.0 + 1e-12));
}

TEST(Strang, GradientGuardStopsFocusingCollapse) {
  auto g = make_grid(48, 5.0, true);
  const CoefficientSpec c{-1.0, 0.5, -1.0, 1.0};
  auto a = zero_energy_amplitude(c, 1.0);
  ASSERT_TRUE(a);
  auto phi = gaussian(g, 1.1 * *a, 1.0);
  StepperConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 2.0;
  cfg.adaptive = true;
  cfg.max_phase_per_step = 0.05;
  cfg.guard.grad_factor = 3.0;
  auto traj = strang_evolve(phi, c, cfg);
  EXPECT_EQ(traj.status, RunStatus::blowup_detected);
  ASSERT_TRUE(traj.events.grad_trigger_time.has_value());
  EXPECT_GE(traj.events.final_grad_norm, 3.0 * traj.events.initial_grad_norm);
}

TEST(Picard, LinearIsExactAfterOneIteration) {
  auto g = make_grid(16, 6.0, true);
  auto phi = gaussian(g);
  auto res = picard_solve(phi, CoefficientSpec{}, 0.3, 1, 0.1);
  EXPECT_LT(rel_diff(res.u, free_propagate(phi, 0.3)), 1e-13);
}

TEST(Picard, AgreesWithStrangAndContracts) {
  auto g = make_grid(32, 8.0, true);
  auto phi = gaussian(g, 0.1, 1.0);
  auto pic = picard_solve(phi, kDefocusing, 0.1, 6, 0.005);
  StepperConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 0.1;
  auto st = strang_evolve(phi, kDefocusing, cfg);
  EXPECT_LT(rel_diff(pic.u, st.final_state), 1e-6);
  ASSERT_EQ(pic.increments.size(), 6u);
  for (int k = 1; k < 4; ++k) EXPECT_LT(pic.increments[k] / pic.increments[k - 1], 0.5);
}

TEST(Picard, RejectsBadArguments) {
  auto phi = gaussian(make_grid(8, 4.0, true));
  EXPECT_THROW(picard_solve(phi, kDefocusing, 0.0, 3, 0.01), ParameterError);
  EXPECT_THROW(picard_solve(phi, kDefocusing, 0.1, 0, 0.01), ParameterError);
  EXPECT_THROW(picard_solve(phi, kDefocusing, 0.1, 3, -1.0), ParameterError);
}

TEST(Picard, DivergenceDetected) {
  auto g = make_grid(16, 4.0, true);
  auto phi = gaussian(g, 4.0, 1.0);
  EXPECT_THROW(picard_solve(phi, CoefficientSpec{-1.0, 0.0, -1.0, 0.0}, 2.0, 20, 0.05), DivergenceError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto g = make_grid(8, 2.5, true);
  auto u = ComplexField::from_function(g, [](double x, double y, double z) { return cplx{x + 0.1 * y, z * y - 1.0 / 3.0}; });
  const auto path = (std::filesystem::temp_directory_path() / "icqnls_checkpoint_test.bin").string();
  save_checkpoint(path, u, 0.123456789);
  auto cp = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(cp.t, 0.123456789);
  EXPECT_TRUE(cp.field.grid().same_as(*g));
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(cp.field[i], u[i]);
}

TEST(Checkpoint, BadHeaderRejected) {
  const auto path = (std::filesystem::temp_directory_path() / "icqnls_bad_checkpoint.bin").string();
  {
    std::ofstream os(path);
    os << "not a checkpoint\n";
  }
  EXPECT_THROW(load_checkpoint(path), ConfigError);
  std::filesystem::remove(path);
}
