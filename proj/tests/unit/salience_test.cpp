#include <gtest/gtest.h>

#include <cmath>

#include "gem/salience.hpp"

namespace gem {
namespace {

TEST(Decay, ZeroTicksIsIdentity) { EXPECT_DOUBLE_EQ(decay(1.0, 0, 0.9), 1.0); }

TEST(Decay, ThreeTicksAtPointNine) { EXPECT_NEAR(decay(1.0, 3, 0.9), 0.729, 1e-12); }

TEST(Decay, ZeroStaysZero) {
  for (std::uint64_t k : {0u, 1u, 7u, 1000u}) EXPECT_EQ(decay(0.0, k, 0.9), 0.0);
}

TEST(Bump, AddsDelta) {
  EXPECT_NEAR(bump(0.729, 1.0), 1.729, 1e-12);
  EXPECT_GT(bump(0.3, 0.01), 0.3);
}

TEST(Bump, AccessesThenDecayMatchesClosedForm) {
  for (int r = 0; r <= 5; ++r) {
    for (std::uint64_t d = 0; d <= 30; ++d) {
      double s = 1.0;
      for (int i = 0; i < r; ++i) s = bump(s, 1.0);
      EXPECT_NEAR(decay(s, d, 0.9), (1.0 + r) * std::pow(0.9, static_cast<double>(d)), 1e-12);
    }
  }
}

TEST(TierOf, DefaultThresholds) {
  SalienceParams p;
  EXPECT_EQ(tier_of(0.6, p), Eligibility::Current);
  EXPECT_EQ(tier_of(0.5, p), Eligibility::Current);
  EXPECT_EQ(tier_of(0.49, p), Eligibility::CompressEligible);
  EXPECT_EQ(tier_of(0.2, p), Eligibility::CompressEligible);
  EXPECT_EQ(tier_of(0.19, p), Eligibility::HideEligible);
  EXPECT_EQ(tier_of(0.05, p), Eligibility::HideEligible);
  EXPECT_EQ(tier_of(0.01, p), Eligibility::ArchiveEligible);
}

TEST(Validate, RejectsBadParameters) {
  SalienceParams p;
  EXPECT_NO_THROW(validate(p));
  auto bad = p;
  bad.decay_factor = 1.0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = p;
  bad.theta_remove = 0.6;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = p;
  bad.initial = 0.4;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = p;
  bad.access_delta = -1.0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

}  // namespace
}  // namespace gem
