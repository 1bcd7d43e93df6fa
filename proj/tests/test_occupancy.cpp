#include <gtest/gtest.h>

#include <cmath>

#include "dmpo/error.hpp"
#include "dmpo/occupancy.hpp"
#include "dmpo/verify.hpp"
#include "oracles.hpp"

using namespace dmpo;

namespace {

std::vector<double> flat(const Table& t) { return {t.flat().begin(), t.flat().end()}; }

}  // namespace

TEST(Saom, SelfLoopPutsAllMassOnOnePair) {
  const Mdp mdp(1, 1, {1.0}, Table(1, 1), {1.0}, {}, 7);
  for (double g : {0.0, 0.5, 0.95}) {
    for (std::size_t T : {1u, 4u, 7u}) {
      EXPECT_NEAR(saom_exact(mdp, TabularPolicy::uniform(1, 1), T, g).d(0, 0), 1.0, 1e-15);
    }
  }
}

TEST(Saom, SingleStateUniformPolicy) {
  const Mdp mdp(1, 2, {1.0, 1.0}, Table(1, 2), {1.0}, {}, 5);
  const Saom d = saom_exact(mdp, TabularPolicy::uniform(1, 2), 5, 0.8);
  EXPECT_NEAR(d.d(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(d.d(0, 1), 0.5, 1e-15);
}

TEST(Saom, TwoStateChainHandComputed) {
  // s0 -> s1, s1 absorbing (not terminal).
  const Mdp mdp(2, 1, {0.0, 1.0, 0.0, 1.0}, Table(2, 1), {1.0, 0.0}, {}, 2);
  const Saom d = saom_exact(mdp, TabularPolicy::uniform(2, 1), 2, 0.5);
  EXPECT_NEAR(d.d(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(d.d(1, 0), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(d.horizon, 2u);
  EXPECT_EQ(d.gamma, 0.5);
}

TEST(Saom, GammaZeroKeepsOnlyFirstStep) {
  const Mdp mdp(2, 1, {0.0, 1.0, 0.0, 1.0}, Table(2, 1), {1.0, 0.0}, {}, 4);
  const Saom d = saom_exact(mdp, TabularPolicy::uniform(2, 1), 4, 0.0);
  EXPECT_EQ(d.d(0, 0), 1.0);
  EXPECT_EQ(d.d(1, 0), 0.0);
}

TEST(Saom, MatchesPathEnumeration) {
  Rng rng(21);
  for (int i = 0; i < 40; ++i) {
    const std::size_t T = 1 + rng.below(4);
    const Mdp mdp = random_mdp(3, 2, T, rng, i % 2 == 0);
    const TabularPolicy p = random_policy(3, 2, rng);
    const double g = i % 5 == 0 ? 0.0 : 0.95 * rng.uniform();
    const Table expected = oracle::saom_enumerate(mdp, p, T, g);
    const Saom d = saom_exact(mdp, p, T, g);
    for (std::size_t k = 0; k < expected.size(); ++k) {
      EXPECT_NEAR(d.d.flat()[k], expected.flat()[k], 1e-13);
    }
  }
}

TEST(Saom, InvariantsHoldOnRandomInstances) {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    const std::size_t T = 1 + rng.below(12);
    const Mdp mdp = random_mdp(2 + rng.below(5), 1 + rng.below(4), T, rng, i % 3 == 0);
    const Saom d = saom_exact(mdp, random_policy(mdp.n_states(), mdp.n_actions(), rng), T,
                              0.99 * rng.uniform());
    EXPECT_NO_THROW(d.validate());
  }
}

TEST(Saom, ValidationErrors) {
  const Mdp mdp(1, 1, {1.0}, Table(1, 1), {1.0}, {}, 3);
  const TabularPolicy p = TabularPolicy::uniform(1, 1);
  EXPECT_THROW(saom_exact(mdp, p, 0, 0.5), ValidationError);
  EXPECT_THROW(saom_exact(mdp, p, 3, 1.0), ValidationError);
  EXPECT_THROW(saom_exact(mdp, p, 3, -0.5), ValidationError);
  Saom bad{Table(1, 2, 0.6), 3, 0.5};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SaomMonteCarlo, DeterministicSystemIsExact) {
  const Mdp chain = envs::chain({.n = 6, .slip = 0.0});
  const TabularPolicy p = TabularPolicy::deterministic({1, 2, 0, 1, 2, 0}, 3, 800.0);
  const Saom exact = saom_exact(chain, p, 10, 0.9);
  for (std::size_t n : {1u, 50u}) {
    const Saom mc = saom_monte_carlo(chain, p, 10, 0.9, n, 3);
    for (std::size_t k = 0; k < exact.d.size(); ++k) {
      EXPECT_NEAR(mc.d.flat()[k], exact.d.flat()[k], 1e-15);
    }
  }
}

TEST(SaomMonteCarlo, ChainAgreesWithinOnePercent) {
  const Mdp chain = envs::chain({.n = 5, .slip = 0.1});
  const TabularPolicy p = TabularPolicy::uniform(5, 3);
  const Saom exact = saom_exact(chain, p, chain.max_horizon(), 0.9);
  const Saom mc = saom_monte_carlo(chain, p, chain.max_horizon(), 0.9, 100000, 17);
  for (std::size_t k = 0; k < exact.d.size(); ++k) {
    EXPECT_LT(std::abs(mc.d.flat()[k] - exact.d.flat()[k]), 0.01);
  }
}

TEST(SaomMonteCarlo, ErrorShrinksLikeInverseSqrtN) {
  const Mdp chain = envs::chain({.n = 5, .slip = 0.2});
  const TabularPolicy p = TabularPolicy::uniform(5, 3);
  const Saom exact = saom_exact(chain, p, 8, 0.9);
  const std::vector<std::size_t> sizes{1000, 10000, 100000};
  std::vector<double> rms;
  for (std::size_t n : sizes) {
    double sq = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
      const Saom mc = saom_monte_carlo(chain, p, 8, 0.9, n, 1000 + rep);
      for (std::size_t k = 0; k < exact.d.size(); ++k) {
        sq += std::pow(mc.d.flat()[k] - exact.d.flat()[k], 2);
      }
    }
    rms.push_back(std::sqrt(sq / reps));
  }
  const double slope = (std::log(rms[2]) - std::log(rms[0])) /
                       (std::log(double(sizes[2])) - std::log(double(sizes[0])));
  EXPECT_NEAR(slope, -0.5, 0.15);
}

TEST(OptimalSaom, ConstantRewardLeavesReferenceUnchanged) {
  Rng rng(23);
  const Mdp base = random_mdp(3, 2, 4, rng);
  const Mdp mdp = base.with_reward(Table(3, 2, 0.4));
  const Saom ref = saom_exact(mdp, random_policy(3, 2, rng), 4, 0.9);
  const SaomSolution sol = optimal_saom(mdp, ref, 0.5);
  for (std::size_t k = 0; k < ref.d.size(); ++k) {
    EXPECT_NEAR(sol.d_star.d.flat()[k], ref.d.flat()[k], 1e-15);
  }
  EXPECT_NEAR(sol.partition_z, std::exp(0.4 / 0.5), 1e-12);
}

TEST(OptimalSaom, HugeBetaStaysAtReference) {
  Rng rng(24);
  const Mdp mdp = random_mdp(4, 3, 5, rng);
  const Saom ref = saom_exact(mdp, random_policy(4, 3, rng), 5, 0.9);
  const SaomSolution sol = optimal_saom(mdp, ref, 1e9);
  for (std::size_t k = 0; k < ref.d.size(); ++k) {
    EXPECT_NEAR(sol.d_star.d.flat()[k], ref.d.flat()[k], 1e-6);
  }
}

TEST(OptimalSaom, BeatsSimplexPointsAndMatchesGradientAscent) {
  Rng rng(25);
  for (int i = 0; i < 5; ++i) {
    const Mdp mdp = random_mdp(4, 3, 5, rng);
    const Saom ref = saom_exact(mdp, random_policy(4, 3, rng), 5, 0.9);
    const double beta = 0.3 + rng.uniform();
    const SaomSolution sol = optimal_saom(mdp, ref, beta);
    const auto r = flat(mdp.reward_table());
    const auto dref = flat(ref.d);
    const auto pga = oracle::kl_optimum_pga(dref, r, beta);
    EXPECT_NEAR(oracle::kl_objective(pga, dref, r, beta), sol.objective_value, 1e-9);
    for (std::size_t k = 0; k < pga.size(); ++k) EXPECT_NEAR(pga[k], sol.d_star.d.flat()[k], 1e-6);
    for (int p = 0; p < 2000; ++p) {
      std::vector<double> x(12);
      double total = 0.0;
      for (double& v : x) total += v = -std::log1p(-rng.uniform());
      for (double& v : x) v /= total;
      EXPECT_LE(oracle::kl_objective(x, dref, r, beta), sol.objective_value);
    }
  }
}

TEST(OptimalSaom, ZeroReferenceMassStaysZero) {
  const Mdp mdp(1, 2, {1.0, 1.0}, Table(1, 2, 0.5), {1.0}, {}, 2);
  Saom ref{Table(1, 2), 2, 0.5};
  ref.d(0, 0) = 1.0;
  const SaomSolution sol = optimal_saom(mdp, ref, 0.2);
  EXPECT_EQ(sol.d_star.d(0, 1), 0.0);
  EXPECT_NEAR(sol.d_star.d(0, 0), 1.0, 1e-15);
}

TEST(OptimalSaom, RejectsNonPositiveBeta) {
  const Mdp mdp(1, 1, {1.0}, Table(1, 1), {1.0}, {}, 2);
  const Saom ref = saom_exact(mdp, TabularPolicy::uniform(1, 1), 2, 0.5);
  EXPECT_THROW(optimal_saom(mdp, ref, 0.0), ValidationError);
  EXPECT_THROW(optimal_saom(mdp, ref, -1.0), ValidationError);
}

TEST(ImpliedReward, IdentityRatioGivesZero) {
  Rng rng(26);
  const Mdp mdp = random_mdp(3, 2, 4, rng);
  const Saom ref = saom_exact(mdp, random_policy(3, 2, rng), 4, 0.7);
  const Table r = implied_reward(ref.d, ref.d, 0.3, 1.0);
  for (double v : r.flat()) EXPECT_EQ(v, 0.0);
}

TEST(ImpliedReward, RoundTripWithSingleScalarZ) {
  Rng rng(27);
  for (int i = 0; i < 30; ++i) {
    const Mdp mdp = random_mdp(3, 2, 5, rng, i % 2 == 0);
    const Saom ref = saom_exact(mdp, random_policy(3, 2, rng), 5, 0.9 * rng.uniform());
    const double beta = 0.1 + rng.uniform();
    const SaomSolution sol = optimal_saom(mdp, ref, beta);
    const Table r = implied_reward(sol.d_star.d, ref.d, beta, sol.partition_z);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 2; ++a) {
        if (ref.d(s, a) > 0.0) EXPECT_NEAR(r(s, a), mdp.reward(s, a), 1e-10);
      }
    }
  }
}

TEST(ImpliedReward, InvariantUnderCommonMask) {
  Rng rng(28);
  const Mdp mdp = random_mdp(3, 2, 4, rng);
  const Saom ref = saom_exact(mdp, random_policy(3, 2, rng), 4, 0.8);
  const SaomSolution sol = optimal_saom(mdp, ref, 0.4);
  Table ds = sol.d_star.d;
  Table dr = ref.d;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const double m = 0.5 + rng.uniform();
    ds.flat()[k] *= m;
    dr.flat()[k] *= m;
  }
  const Table a = implied_reward(sol.d_star.d, ref.d, 0.4, sol.partition_z);
  const Table b = implied_reward(ds, dr, 0.4, sol.partition_z);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.flat()[k], b.flat()[k], 1e-12);
}

TEST(ImpliedReward, SupportMismatch) {
  Table ref(1, 2, 0.5);
  Table star(1, 2);
  star(0, 0) = 1.0;
  EXPECT_THROW(implied_reward(star, ref, 0.1, 1.0), SupportMismatchError);
  Table ref2(1, 2);
  ref2(0, 0) = 1.0;
  Table star2(1, 2, 0.5);
  EXPECT_THROW(implied_reward(star2, ref2, 0.1, 1.0), SupportMismatchError);
}

TEST(RealizabilityGap, ZeroForPolicyOccupancy) {
  Rng rng(29);
  const Mdp mdp = random_mdp(3, 2, 6, rng);
  const Saom d = saom_exact(mdp, random_policy(3, 2, rng), 6, 0.9);
  EXPECT_LT(realizability_gap(mdp, d), 1e-12);
}

TEST(CompoundingError, CountingCases) {
  const std::vector<Trajectory> experts{Trajectory{{{0, 1}, {1, 2}, {2, 0}, {3, 1}}}};
  EXPECT_EQ(compounding_error(experts[0], experts), 0.0);
  EXPECT_EQ(compounding_error(Trajectory{{{0, 0}, {1, 0}}}, experts), 1.0);
  EXPECT_EQ(compounding_error(Trajectory{{{0, 1}, {1, 2}, {2, 0}, {3, 0}}}, experts), 0.25);
}
