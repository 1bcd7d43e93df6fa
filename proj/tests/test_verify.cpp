#include <gtest/gtest.h>

#include <cmath>

#include "dmpo/verify.hpp"

using namespace dmpo;

TEST(Verify, FullBatteryPasses) {
  const auto results = run_verification();
  ASSERT_EQ(results.size(), 8u);
  for (const CheckResult& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " measured " << r.measured << " tol " << r.tolerance;
    EXPECT_LE(r.measured, r.tolerance) << r.name;
  }
}

TEST(Verify, CorruptedDenominatorBreaksFirstStepDegeneracy) {
  VerifyOptions options;
  // T (1 - gamma) in place of 1 - gamma^T: phi(0, T) tends to 1/T as gamma -> 0.
  options.phi_impl = [](std::size_t t, std::size_t len, double g) {
    return std::pow(g, static_cast<double>(t)) *
           (1.0 - std::pow(g, static_cast<double>(len - t))) /
           (static_cast<double>(len) * (1.0 - g));
  };
  const CheckResult r = check_first_step_degeneracy(options);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.measured, r.tolerance);
}

TEST(Verify, DroppedDenominatorIsCaughtByPhiLaw) {
  VerifyOptions options;
  // Without the denominator the error is O(gamma), invisible at gamma = 1e-8
  // but not to the exact-fraction comparison.
  options.phi_impl = [](std::size_t t, std::size_t len, double g) {
    return std::pow(g, static_cast<double>(t)) *
           (1.0 - std::pow(g, static_cast<double>(len - t)));
  };
  EXPECT_TRUE(check_first_step_degeneracy(options).passed);
  EXPECT_FALSE(check_phi_law(options).passed);
}

TEST(Verify, CorruptedPhiFailsPhiLaw) {
  VerifyOptions options;
  options.phi_impl = [](std::size_t t, std::size_t len, double g) {
    return phi(t, len, g) * (1.0 + 1e-9);
  };
  EXPECT_FALSE(check_phi_law(options).passed);
}

TEST(Verify, GradientReportBelowTolerance) {
  const CheckResult r = check_gradient(VerifyOptions{});
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.measured, 1e-6);
  EXPECT_GT(r.measured, 0.0);
}

TEST(Verify, OtherSeedAlsoPasses) {
  VerifyOptions options;
  options.seed = 7;
  EXPECT_TRUE(check_phi_law(options).passed);
  EXPECT_TRUE(check_bradley_terry(options).passed);
  EXPECT_TRUE(check_reward_round_trip(options).passed);
}

TEST(VerifyHelpers, RandomObjectsAreValid) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Mdp mdp = random_mdp(2 + rng.below(5), 1 + rng.below(4), 6, rng, i % 2 == 0);
    const PreferencePair pair = random_pair(mdp, 6, rng);
    EXPECT_NO_THROW(validate_trajectory(pair.win, mdp));
    EXPECT_NO_THROW(validate_trajectory(pair.lose, mdp));
    EXPECT_EQ(pair.win.initial_state(), pair.lose.initial_state());
  }
}
