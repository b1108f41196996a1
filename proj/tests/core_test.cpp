#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qsc/core.hpp"

namespace qsc {
namespace {

TEST(MakeInputState, DefiniteIsBasisState) {
  const auto s = make_input_state(InputKind::Definite, 1.0);
  EXPECT_EQ(s.a1(), InputState::amplitude(1.0, 0.0));
  EXPECT_EQ(s.a2(), InputState::amplitude(0.0, 0.0));
  EXPECT_TRUE(s.is_definite());
}

TEST(MakeInputState, EqualSuperpositionIsNormalizedSum) {
  const auto s = make_input_state(InputKind::Superposition, 0.5);
  EXPECT_NEAR(s.a1().real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.a2().real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.kind(), InputKind::Superposition);
}

TEST(MakeInputState, RejectsOutOfRangeWeight) {
  EXPECT_THROW(make_input_state(InputKind::Superposition, 1.2), DomainError);
  EXPECT_THROW(make_input_state(InputKind::Superposition, -0.1), DomainError);
  EXPECT_THROW(make_input_state(InputKind::Superposition, std::nan("")), DomainError);
}

TEST(MakeInputState, DefiniteRequiresUnitWeight) {
  EXPECT_THROW(make_input_state(InputKind::Definite, 0.5), InconsistencyError);
}

TEST(MakeInputState, WeightWithinToleranceOfOneIsDefinite) {
  EXPECT_TRUE(make_input_state(InputKind::Superposition, 0.999999999999).is_definite());
  EXPECT_FALSE(make_input_state(InputKind::Superposition, 0.99999999999).is_definite());
}

TEST(InputState, RejectsUnnormalizedAmplitudes) {
  EXPECT_THROW(InputState(1.0, 1.0), DomainError);
  EXPECT_NO_THROW(InputState(std::polar(1.0, 0.3) / std::sqrt(2.0), 1.0 / std::sqrt(2.0)));
}

TEST(BornProbability, Examples) {
  EXPECT_DOUBLE_EQ(born_probability(make_input_state(InputKind::Definite, 1.0)), 1.0);
  EXPECT_NEAR(born_probability(make_input_state(InputKind::Superposition, 0.5)), 0.5, 1e-15);
  EXPECT_NEAR(born_probability(InputState(std::sqrt(0.3), std::sqrt(0.7))), 0.3, 1e-15);
}

TEST(BornProbability, InvertsConstructionForSampledWeights) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double p1 = u(gen);
    EXPECT_NEAR(born_probability(make_input_state(InputKind::Superposition, p1)), p1, 1e-12);
  }
}

TEST(StateFidelity, Examples) {
  const auto y1 = make_input_state(InputKind::Definite, 1.0);
  const auto plus = make_input_state(InputKind::Superposition, 0.5);
  const auto y2 = make_input_state(InputKind::Superposition, 0.0);
  EXPECT_DOUBLE_EQ(state_fidelity(y1, y1), 1.0);
  EXPECT_NEAR(state_fidelity(y1, plus), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(state_fidelity(y1, y2), 0.0);
}

TEST(StateFidelity, SymmetricAndBoundedIncludingPhases) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double pa = u(gen), pb = u(gen);
    const InputState a(std::polar(std::sqrt(pa), 6.0 * u(gen)), std::polar(std::sqrt(1 - pa), 6.0 * u(gen)));
    const InputState b(std::polar(std::sqrt(pb), 6.0 * u(gen)), std::polar(std::sqrt(1 - pb), 6.0 * u(gen)));
    const double ab = state_fidelity(a, b);
    EXPECT_NEAR(ab, state_fidelity(b, a), 1e-14);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(state_fidelity(a, a), 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace qsc
