#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "polyquant/equilibrium.hpp"
#include "polyquant/state_models.hpp"

using namespace polyquant;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST(ComponentLaw, PlanarRotorIsConstant) {
  const auto law = component_law(ClassicalQuadratic{2, {kTwoPi, kTwoPi}});
  const auto* c = std::get_if<ConstantDensity>(&law.form());
  ASSERT_NE(c, nullptr);
  EXPECT_NEAR(c->value, 1.0, 1e-15);
  const auto law2 = component_law(ClassicalQuadratic{2, {3.0, 3.0}});
  EXPECT_NEAR(density(law2, 4.2), kTwoPi / 3.0, 1e-14);
}

TEST(ComponentLaw, OscillatorIsUnitComb) {
  const auto law = component_law(HarmonicOscillator{0.7});
  const auto* c = std::get_if<DiracComb>(&law.form());
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->spacing, 0.7);
  EXPECT_EQ(c->weight, 1.0);
  for (const auto& a : law.atoms()) EXPECT_EQ(a.weight, 1.0);
}

TEST(ComponentLaw, ThreeDofCoefficientFromEllipsoidVolume) {
  // Volume of {1/2 sum w_i^2 < I} in R^3 is (4/3) pi (2I)^{3/2}; its derivative is
  // 4 pi sqrt(2) sqrt(I) = (2 pi)^{3/2} / Gamma(3/2) * sqrt(I).
  const auto law = component_law(ClassicalQuadratic{3, {1.0, 1.0, 1.0}});
  const auto* p = std::get_if<PowerDensity>(&law.form());
  ASSERT_NE(p, nullptr);
  EXPECT_NEAR(p->exponent, 0.5, 1e-15);
  EXPECT_NEAR(p->coefficient, 4.0 * std::numbers::pi * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(p->coefficient, std::pow(kTwoPi, 1.5) / std::tgamma(1.5), 1e-12);
}

TEST(ComponentLaw, EllipsoidMonteCarlo) {
  // Uniform states in the box |w_i| <= R; fraction with energy below I gives cdf(I).
  const ClassicalQuadratic q{3, {1.0, 2.0, 3.0}};
  const auto law = component_law(q);
  std::mt19937_64 rng(5);
  const double I_top = 2.0;
  std::array<double, 3> R;
  for (int i = 0; i < 3; ++i) R[i] = std::sqrt(2.0 * I_top / q.coeffs[i]);
  const double box = 8.0 * R[0] * R[1] * R[2];
  const int n = 400000;
  std::array<int, 4> counts{};
  const std::array<double, 4> levels{0.5, 1.0, 1.5, 2.0};
  for (int k = 0; k < n; ++k) {
    double e = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double w = std::uniform_real_distribution<double>(-R[i], R[i])(rng);
      e += 0.5 * q.coeffs[i] * w * w;
    }
    for (int j = 0; j < 4; ++j) counts[j] += e < levels[j];
  }
  for (int j = 0; j < 4; ++j) {
    const double p = static_cast<double>(counts[j]) / n;
    const double est = p * box;
    const double sigma = box * std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(est, cdf(law, levels[j]), 3.0 * sigma + 1e-12) << levels[j];
  }
}

TEST(ComponentLaw, CustomDiscreteIsGrounded) {
  const auto law = component_law(CustomDiscrete{{{2.0, 1.0}, {5.0, 3.0}}});
  ASSERT_EQ(law.atoms().size(), 2u);
  EXPECT_EQ(law.atoms()[0].location, 0.0);
  EXPECT_EQ(law.atoms()[1].location, 3.0);
  EXPECT_EQ(law.atoms()[1].weight, 3.0);
}

TEST(ComponentLaw, InvalidComponentThrows) {
  EXPECT_THROW(component_law(HarmonicOscillator{-1.0}), DomainError);
  EXPECT_THROW(component_law(ClassicalQuadratic{2, {1.0}}), DomainError);
}

TEST(GroundEnergy, Values) {
  EXPECT_EQ(ground_energy(HarmonicOscillator{1.0}), 0.5);
  EXPECT_EQ(ground_energy(ClassicalQuadratic{2, {1.0, 1.0}}), 0.0);
  EXPECT_EQ(ground_energy(CustomDiscrete{{{2.0, 1.0}, {5.0, 3.0}}}), 2.0);
  EXPECT_EQ(ground_energy(CustomContinuous{{{0.0, 1.0}, {1.0, 1.0}}, 0.25}), 0.25);
}

TEST(Combine, DiatomicGround) {
  const auto rot = make_model({ClassicalQuadratic{2, {kTwoPi, kTwoPi}}});
  const auto vib = make_model({HarmonicOscillator{1.0}});
  const auto m = combine({rot, vib});
  EXPECT_EQ(m.components.size(), 2u);
  EXPECT_EQ(m.ground, 0.5);
}

TEST(Combine, TriatomicGround) {
  const auto rot = make_model({ClassicalQuadratic{3, {1.0, 2.0, 3.0}}});
  const auto vib = make_model({HarmonicOscillator{1.0}, HarmonicOscillator{2.0}, HarmonicOscillator{4.0}});
  const auto m = combine({rot, vib});
  EXPECT_EQ(m.components.size(), 4u);
  EXPECT_EQ(m.ground, 0.5 * (1.0 + 2.0 + 4.0));
}

TEST(Combine, SingletonAndEmpty) {
  const auto m = make_model({HarmonicOscillator{2.0}});
  EXPECT_EQ(combine({m}), m);
  EXPECT_THROW(combine({}), DomainError);
  EXPECT_THROW(make_model({}), DomainError);
}

TEST(TotalLaw, DiatomicStaircase) {
  const auto law = total_law(make_model({ClassicalQuadratic{2, {kTwoPi, kTwoPi}}, HarmonicOscillator{1.0}}));
  ASSERT_TRUE(std::holds_alternative<StaircaseDensity>(law.form()));
  EXPECT_EQ(density(law, 2.5), 3.0);
}

TEST(TotalLaw, SingleRotor) {
  const auto law = total_law(make_model({ClassicalQuadratic{2, {kTwoPi, kTwoPi}}}));
  EXPECT_TRUE(std::holds_alternative<ConstantDensity>(law.form()));
}

TEST(TotalLaw, TwoOscillatorsCountPairs) {
  const auto law = total_law(make_model({HarmonicOscillator{1.0}, HarmonicOscillator{1.0}}));
  for (int n = 0; n < 20; ++n) {
    // Pair count for n1 + n2 = n.
    int pairs = 0;
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b) pairs += (a + b == n);
    EXPECT_EQ(law.atoms()[n].location, n);
    EXPECT_EQ(law.atoms()[n].weight, pairs);
  }
}

TEST(SeparatedQuantile, Diatomic) {
  const auto m = make_model({ClassicalQuadratic{2, {kTwoPi, kTwoPi}}, HarmonicOscillator{1.0}});
  EXPECT_NEAR(separated_quantile_energy(m, {0.7, 2.3}), 3.2, 1e-14);
  EXPECT_NEAR(separated_quantile_energy(m, {1e-12, 1e-12}), 0.5, 1e-11);
  EXPECT_THROW(separated_quantile_energy(m, {0.5}), DomainError);
}

TEST(SeparatedQuantile, SingletonRotor) {
  const auto m = make_model({ClassicalQuadratic{2, {3.0, 3.0}}});
  EXPECT_NEAR(separated_quantile_energy(m, {5.0}), 3.0 / kTwoPi * 5.0, 1e-13);
}

TEST(Properties, PartitionFunctionMultiplies) {
  const std::vector<StateComponent> parts{ClassicalQuadratic{3, {1.0, 2.0, 3.0}}, HarmonicOscillator{1.0},
                                          CustomDiscrete{{{0.0, 1.0}, {0.4, 2.0}, {1.3, 1.0}}}};
  const NumericPolicy policy{60.0, 0.0, 0.5};
  const auto m = make_model(parts);
  const auto total = total_law(m, policy);
  for (double beta : {0.8, 1.0, 3.0}) {
    double prod = 1.0;
    for (const auto& c : parts) prod *= partition_function(component_law(c, policy), beta);
    EXPECT_NEAR(partition_function(total, beta) / prod, 1.0, 1e-9) << beta;
  }
}

TEST(Properties, TotalLawMatchesConvolutionOfSubmodels) {
  const auto a = make_model({HarmonicOscillator{1.0}, CustomDiscrete{{{0.0, 1.0}, {0.5, 2.0}}}});
  const auto b = make_model({HarmonicOscillator{1.5}});
  const NumericPolicy policy{30.0, 0.0, 1.0};
  const auto lhs = total_law(combine({a, b}), policy);
  const auto rhs = convolve(total_law(a, policy), total_law(b, policy), convolution_options(policy));
  for (double I = 0.0; I <= 30.0; I += 0.37) EXPECT_NEAR(cdf(lhs, I), cdf(rhs, I), 1e-9);
}
