#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace icqnls;
using namespace icqnls::testing;

namespace {

ProbeSpec gaussian_probe(ProbeKind kind, int n = 64, double half = 8.0) {
  ProbeSpec s;
  s.kind = kind;
  s.ensemble.generator = EnsembleGenerator::gaussian;
  s.ensemble.count = 1;
  s.grid = {n, half};
  return s;
}

ProbeSpec ensemble_probe(ProbeKind kind, int count, std::uint64_t seed, int n = 48, double half = 8.0) {
  ProbeSpec s;
  s.kind = kind;
  s.ensemble = {EnsembleGenerator::gaussian_harmonic, count, seed};
  s.grid = {n, half};
  return s;
}

}  // namespace

TEST(Probes, KindNamesRoundTrip) {
  for (auto k : {ProbeKind::hardy, ProbeKind::angular_sup, ProbeKind::angular_sup_linear_weight,
                 ProbeKind::angular_interpolation, ProbeKind::l_equivalence, ProbeKind::second_order_equivalence,
                 ProbeKind::commute_multiplier, ProbeKind::free_decay})
    EXPECT_EQ(probe_kind_from_string(to_string(k)), k);
  EXPECT_THROW(probe_kind_from_string("sobolev"), ConfigError);
}

TEST(Probes, SharpHardyConstant) {
  EXPECT_NEAR(hardy_sharp_constant(1.0), 2.0, 1e-14);
  EXPECT_NEAR(hardy_sharp_constant(0.0), 1.0, 1e-14);
}

TEST(Probes, HardyGaussianRatio) {
  auto rep = probe(gaussian_probe(ProbeKind::hardy));
  EXPECT_NEAR(rep.worst_ratio, std::sqrt(4.0 / 3.0), 1e-9);
  EXPECT_NEAR(rep.ceiling, 2.05, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(Probes, HardyEnsembleBelowSharpConstant) {
  auto rep = probe(ensemble_probe(ProbeKind::hardy, 12, 3, 64));
  EXPECT_EQ(rep.ratios.size(), 12u);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.worst_ratio, 2.05);
  EXPECT_GE(rep.worst_case_id, 0);
}

TEST(Probes, AngularSupGaussianRatio) {
  auto rep = probe(gaussian_probe(ProbeKind::angular_sup));
  // sup r^{1/2}e^{-r²/2} = 2^{-1/4}e^{-1/4}; ‖φ‖_{H_L^{1,1}} = ‖φ‖_{H¹} + ‖φ‖₂
  const double want = 0.65489078668153010 / (3.7310615100905626 + std::pow(kPi, 0.75));
  EXPECT_NEAR(rep.worst_ratio, want, 1e-3);
  EXPECT_TRUE(rep.pass);
}

TEST(Probes, LEquivalenceIsExact) {
  auto rep = probe(ensemble_probe(ProbeKind::l_equivalence, 6, 5));
  EXPECT_LT(rep.worst_ratio, 1e-8);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.skipped, 0);
}

TEST(Probes, RadialFieldSkippedForLEquivalence) {
  auto rep = probe(gaussian_probe(ProbeKind::l_equivalence, 32));
  EXPECT_EQ(rep.skipped, 1);
  EXPECT_FALSE(rep.pass);
}

TEST(Probes, SecondOrderBothDirections) {
  auto rep = probe(ensemble_probe(ProbeKind::second_order_equivalence, 4, 11));
  ASSERT_EQ(rep.reverse_ratios.size(), 4u);
  EXPECT_NEAR(rep.worst_ratio, 1.0, 1e-6);
  EXPECT_NEAR(rep.worst_reverse_ratio, 1.0, 1e-6);
  EXPECT_TRUE(rep.pass);
}

TEST(Probes, CommuteHeatMultiplier) {
  auto spec = gaussian_probe(ProbeKind::commute_multiplier, 48, 8.0);
  spec.ensemble.generator = EnsembleGenerator::gaussian_harmonic;
  spec.ensemble.count = 3;
  auto rep = probe(spec);
  EXPECT_LT(rep.worst_ratio, 1e-8);
}

TEST(Probes, FreeDecayRateSettles) {
  auto spec = gaussian_probe(ProbeKind::free_decay, 48, 8.0);
  spec.params.times = {2.0, 4.0, 8.0};
  auto rep = probe(spec);
  EXPECT_TRUE(rep.pass);
  // θ = 0: t^{3/2}‖e^{itΔ}φ‖_∞ = t^{3/2}(1+4t²)^{-3/4} → 2^{-3/2}
  auto g = make_grid(48, 8.0, false);
  ProbeParams q;
  q.theta = 0.0;
  q.times = {50.0};
  const auto r = detail::free_decay_rates(gaussian(g), q);
  EXPECT_NEAR(r[0], std::pow(50.0, 1.5) * std::pow(1.0 + 4.0 * 2500.0, -0.75), 1e-8);
}

TEST(Probes, HypothesisValidation) {
  auto s = gaussian_probe(ProbeKind::angular_interpolation);
  s.params.b = 0.5;
  s.params.eps = 0.5;
  EXPECT_THROW(probe(s), ParameterError);
  s.params.eps = 0.25;
  s.params.p = 1.5;
  EXPECT_THROW(s.validate(), ParameterError);
  auto h = gaussian_probe(ProbeKind::hardy);
  h.params.s = 1.6;
  EXPECT_THROW(h.validate(), ParameterError);
  auto a = gaussian_probe(ProbeKind::angular_sup);
  a.params.b = 1.0;
  EXPECT_THROW(a.validate(), ParameterError);
  auto d = gaussian_probe(ProbeKind::free_decay);
  d.params.times = {1.0};
  EXPECT_THROW(d.validate(), ParameterError);
}

TEST(Probes, ExplicitCeilingOverridesDefault) {
  auto s = gaussian_probe(ProbeKind::hardy);
  s.ceiling = 1.1;
  auto rep = probe(s);
  EXPECT_EQ(rep.ceiling, 1.1);
  EXPECT_FALSE(rep.pass);
}

TEST(Ensemble, DeterministicForSeed) {
  auto g = make_grid(16, 6.0, true);
  EnsembleSpec spec{EnsembleGenerator::gaussian_harmonic, 4, 42};
  auto a = make_ensemble(g, spec);
  auto b = make_ensemble(g, spec);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(max_abs_diff(a[i], b[i]), 0.0);
  spec.seed = 43;
  auto c = make_ensemble(g, spec);
  EXPECT_GT(max_abs_diff(a[0], c[0]), 1e-3);
}

TEST(Ensemble, SolidHarmonicsAreHarmonic) {
  // Δ(r^l Y_lm) = 0: check the Gaussian-free polynomial by finite differences
  const double h = 1e-3, x = 0.3, y = -0.7, z = 0.5;
  for (int l = 0; l <= 2; ++l)
    for (int m = -l; m <= l; ++m) {
      auto f = [&](double a, double b, double c) { return solid_harmonic(l, m, a, b, c); };
      const cplx lap = (f(x + h, y, z) + f(x - h, y, z) + f(x, y + h, z) + f(x, y - h, z) + f(x, y, z + h) +
                        f(x, y, z - h) - 6.0 * f(x, y, z)) /
                       (h * h);
      EXPECT_LT(std::abs(lap), 1e-6) << l << " " << m;
    }
}

TEST(Probes, DeterministicReports) {
  auto spec = ensemble_probe(ProbeKind::hardy, 3, 9, 32);
  auto a = probe(spec), b = probe(spec);
  ASSERT_EQ(a.ratios.size(), b.ratios.size());
  for (std::size_t i = 0; i < a.ratios.size(); ++i) EXPECT_EQ(a.ratios[i], b.ratios[i]);
}
