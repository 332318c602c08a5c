#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace icqnls;
using namespace icqnls::testing;

namespace {

// Reference values from 1-D radial quadrature at 20 digits.
constexpr double kMass = 5.5683279968317078;
constexpr double kGrad2 = 8.3524919952475618;
constexpr double kQuarticB0 = 0.49217531080382562;  // ¼∫e^{-2|x|²}
constexpr double kSexticB0 = 0.17860420377260645;   // ⅙∫e^{-3|x|²}
constexpr double kPotentialB2 = 0.36913148310286921;  // ¼∫|x|²e^{-2|x|²}
constexpr double kQuarticHalf = 1.7168107927222903;   // ∫|x|^{1/2}e^{-2|x|²}
constexpr double kSexticOne = 0.69813170079773183;    // ∫|x|e^{-3|x|²}

GridPtr grid64() { return make_grid(64, 8.0, true); }

}  // namespace

TEST(Model, NonlinearTermPointwise) {
  auto g = make_grid(8, 1.0, false);
  ComplexField zero(g);
  EXPECT_EQ(lp_norm(nonlinear_term(zero, CoefficientSpec{1.0, 0.5, 1.0, 1.0}), kInf), 0.0);

  auto two = ComplexField::from_function(g, [](double, double, double) { return cplx{2.0, 0.0}; });
  auto n1 = nonlinear_term(two, CoefficientSpec{1.0, 0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(n1[g->index(3, 3, 3)].real(), 8.0);

  auto one = ComplexField::from_function(g, [](double, double, double) { return cplx{1.0, 0.0}; });
  auto n2 = nonlinear_term(one, CoefficientSpec{0.0, 0.0, 1.0, 2.0});
  EXPECT_DOUBLE_EQ(n2[g->index(6, 4, 4)].real(), 0.25);
}

TEST(Model, CoefficientValidation) {
  EXPECT_THROW((CoefficientSpec{1.0, -0.5, 0.0, 0.0}.validate()), ConfigError);
  EXPECT_TRUE((CoefficientSpec{-1.0, 0.5, -1.0, 1.0}.focusing()));
  EXPECT_TRUE(CoefficientSpec{}.linear());
}

TEST(Model, GaussianMass) {
  auto phi = gaussian(grid64());
  EXPECT_NEAR(mass(phi), kMass, 1e-6);
  const double a = 1.7;
  EXPECT_NEAR(mass(cplx{a, 0.0} * phi), a * a * mass(phi), 1e-12 * mass(phi));
  auto boosted = ComplexField::from_function(grid64(), [](double x, double y, double z) {
    return std::polar(std::exp(-(x * x + y * y + z * z) / 2.0), 0.7 * x - 0.4 * z);
  });
  EXPECT_NEAR(mass(boosted), mass(phi), 1e-12 * mass(phi));
}

TEST(Model, GaussianEnergyPieces) {
  auto phi = gaussian(grid64());
  EXPECT_NEAR(energy(phi, CoefficientSpec{}), 0.5 * kGrad2, 1e-6);
  EXPECT_NEAR(potential_energy(phi, CoefficientSpec{1.0, 0.0, 0.0, 0.0}), kQuarticB0, 1e-6);
  EXPECT_NEAR(potential_energy(phi, CoefficientSpec{0.0, 0.0, 1.0, 0.0}), kSexticB0, 1e-6);
  EXPECT_NEAR(potential_energy(phi, CoefficientSpec{1.0, 2.0, 0.0, 0.0}), kPotentialB2, 1e-6);
}

TEST(Model, CuspWeightIntegrals) {
  auto phi = gaussian(make_grid(96, 8.0, true));
  const CoefficientSpec c{1.0, 0.5, 1.0, 1.0};
  auto w = weighted_integrals(phi, CoefficientField(phi.grid_ptr(), c));
  EXPECT_NEAR(w.quartic / kQuarticHalf, 1.0, 1e-4);
  EXPECT_NEAR(w.sextic / kSexticOne, 1.0, 1e-4);
}

TEST(Model, PotentialIsEnergyMinusKinetic) {
  auto g = make_grid(32, 6.0, true);
  auto phi = gaussian(g, 0.8, 1.1);
  const CoefficientSpec c{1.0, 0.5, 1.0, 1.0};
  EXPECT_NEAR(potential_energy(phi, c), energy(phi, c) - 0.5 * grad_norm2(phi), 1e-12);
  EXPECT_EQ(potential_energy(ComplexField(g), c), 0.0);
}

TEST(Model, EnergyPhaseInvariantAndBounded) {
  auto g = make_grid(32, 6.0, true);
  auto phi = gaussian(g, 0.8, 1.1);
  const CoefficientSpec c{1.0, 0.5, 2.0, 1.0};
  const double e = energy(phi, c);
  EXPECT_NEAR(energy(std::polar(1.0, 1.234) * phi, c), e, 1e-12 * e);
  EXPECT_GE(e, 0.5 * grad_norm2(phi));
}

TEST(Model, ClosedFormGaussianEnergy) {
  const CoefficientSpec c{-1.0, 0.5, 1.0, 1.0};
  const double amp = 1.3, width = 0.8;
  auto phi = gaussian(make_grid(96, 8.0, true), amp, width);
  auto cf = gaussian_energy(c, amp, width);
  EXPECT_NEAR(cf.grad_norm2 / grad_norm2(phi), 1.0, 1e-8);
  EXPECT_NEAR(cf.energy() / energy(phi, c), 1.0, 1e-3);
  EXPECT_NEAR(radial_gaussian_moment(0.0, 1.0), kMass, 1e-12);
}

TEST(Model, ZeroEnergyAmplitude) {
  const CoefficientSpec focusing{-1.0, 0.5, -1.0, 1.0};
  auto a = zero_energy_amplitude(focusing, 1.0);
  ASSERT_TRUE(a.has_value());
  EXPECT_NEAR(gaussian_energy(focusing, *a, 1.0).energy(), 0.0, 1e-12);
  EXPECT_LT(gaussian_energy(focusing, 1.1 * *a, 1.0).energy(), 0.0);
  EXPECT_FALSE(zero_energy_amplitude(CoefficientSpec{1.0, 0.5, 1.0, 1.0}, 1.0).has_value());
}

TEST(Model, WeightDerivativeBounds) {
  // |∇|x|^b| = |b| |x|^{b-1}, checked by central differences away from the origin
  for (double b : {0.5, 1.0, 2.0}) {
    for (double r : {0.1, 0.5, 2.0}) {
      const double h = 1e-6 * r;
      const double d = (std::pow(r + h, b) - std::pow(r - h, b)) / (2.0 * h);
      EXPECT_LE(std::abs(d), 1.0001 * std::abs(b) * std::pow(r, b - 1.0));
      const double d2 = (std::pow(r + 1e-4 * r, b) - 2.0 * std::pow(r, b) + std::pow(r - 1e-4 * r, b)) /
                        std::pow(1e-4 * r, 2);
      // Hessian eigenvalues: b(b-1)r^{b-2} radially, b r^{b-2} tangentially
      EXPECT_LE(std::abs(d2), 1.001 * std::max(std::abs(b * (b - 1.0)), std::abs(b)) * std::pow(r, b - 2.0));
    }
  }
}

TEST(BlowupBound, ExamplesAndEdgeCases) {
  auto t1 = blowup_time_bound({0.0, 1.0, 0.0, -1.0});
  ASSERT_TRUE(t1.has_value());
  EXPECT_NEAR(*t1, 0.35355339059327376, 1e-12);

  auto t2 = blowup_time_bound({1.0, 1.0, 2.0, -1.0});
  ASSERT_TRUE(t2.has_value());
  EXPECT_NEAR(*t2, 0.77429188517743177, 1e-12);

  EXPECT_FALSE(blowup_time_bound({0.0, 1.0, 0.5, 1.0}).has_value());
  EXPECT_FALSE(blowup_time_bound({0.0, 1.0, 0.0, 0.0}).has_value());
  EXPECT_THROW(blowup_time_bound({-1.0, 1.0, 0.0, -1.0}), ParameterError);
}

TEST(BlowupBound, RootAgreesWithBisection) {
  const BlowupBoundParams p{0.5, 3.0, -1.5, -0.4};
  auto t = blowup_time_bound(p);
  ASSERT_TRUE(t.has_value());
  double lo = 0.0, hi = 10.0;
  ASSERT_GT(concavity_bound(p, lo), 0.0);
  ASSERT_LT(concavity_bound(p, hi), 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (concavity_bound(p, mid) > 0.0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(lo, *t, 1e-12);
}

TEST(BlowupBound, UpwardParabolaFirstRoot) {
  // 1 - 4t + 2t²: roots 1 ± 1/√2
  const BlowupBoundParams p{0.0, 1.0, -1.0, 0.25};
  auto t = blowup_time_bound(p);
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, 1.0 - std::sqrt(0.5), 1e-12);
}
