#include <gtest/gtest.h>

#include <cmath>

#include "dmpo/datagen.hpp"
#include "dmpo/error.hpp"
#include "dmpo/trainer.hpp"
#include "dmpo/verify.hpp"

using namespace dmpo;

namespace {

Mdp chain(std::size_t n, double slip, std::size_t start = 0, std::size_t horizon = 0) {
  envs::ChainParams p;
  p.n = n;
  p.slip = slip;
  p.start = start;
  p.horizon = horizon;
  return envs::chain(p);
}

TrainConfig sft_config(double lr, std::size_t epochs) {
  TrainConfig cfg;
  cfg.loss_kind = LossKind::kSft;
  cfg.learning_rate = lr;
  cfg.epochs = epochs;
  cfg.eval_episodes = 20;
  return cfg;
}

TrainConfig pref_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.beta = 0.5;
  cfg.gamma = 0.9;
  cfg.learning_rate = 0.5;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.eval_episodes = 20;
  return cfg;
}

struct Fixture {
  Mdp mdp = chain(6, 0.1, 0, 10);
  TabularPolicy ref;
  std::vector<PreferencePair> pairs;

  Fixture() {
    const auto wins = successful_expert_trajectories(mdp, 24, 1);
    ref = train_sft(mdp, wins, sft_config(1.0, 5)).policy.frozen_copy();
    DatasetOptions options;
    options.n_pairs = 24;
    options.seed = 1;
    options.noise = NoiseSpec{0.5, 0.3};
    pairs = build_dataset(mdp, wins, ref, options).pairs;
  }
};

double mean_margin(const std::vector<PreferencePair>& pairs, const TabularPolicy& policy,
                   const TabularPolicy& ref, const TrainConfig& cfg) {
  double total = 0.0;
  for (const PreferencePair& p : pairs) {
    total += traj_score(policy, ref, p.win, cfg.beta, cfg.gamma) -
             traj_score(policy, ref, p.lose, cfg.beta, cfg.gamma);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

TEST(TrainSft, SingleExpertPairBecomesConfident) {
  const Mdp mdp(2, 3, std::vector<double>(12, 0.5), Table(2, 3), {1.0, 0.0}, {}, 1);
  const std::vector<Trajectory> expert{Trajectory{{{0, 2}}}};
  const TrainResult result = train_sft(mdp, expert, sft_config(1.0, 200));
  EXPECT_GT(result.policy.prob(0, 2), 0.99);
  EXPECT_FALSE(result.policy.frozen());
}

TEST(TrainSft, LossIsNonIncreasingAtSmallRate) {
  const Mdp mdp = chain(10, 0.1);
  const auto expert = expert_trajectories(mdp, 30, 2);
  const TrainResult result = train_sft(mdp, expert, sft_config(0.5, 100));
  ASSERT_EQ(result.metrics.size(), 100u);
  for (std::size_t i = 1; i < result.metrics.size(); ++i) {
    EXPECT_LE(result.metrics[i].loss, result.metrics[i - 1].loss);
  }
}

TEST(TrainSft, MatchesExpertOnVisitedStates) {
  const Mdp mdp = chain(10, 0.0);
  const auto expert = expert_trajectories(mdp, 10, 3);
  const auto optimal = optimal_actions(mdp);
  const TrainResult result = train_sft(mdp, expert, sft_config(1.0, 200));
  for (const Trajectory& t : expert) {
    for (const Step& step : t.steps) {
      EXPECT_EQ(result.policy.greedy_action(step.state), optimal[step.state]);
    }
  }
  EXPECT_EQ(result.metrics.back().avg_final_reward, 1.0);
  EXPECT_EQ(result.metrics.back().compounding_error, 0.0);
}

TEST(TrainSft, RejectsEmptyExpertSet) {
  EXPECT_THROW(train_sft(chain(4, 0.0), {}, sft_config(1.0, 5)), ValidationError);
}

TEST(TrainPreference, ZeroEpochsReturnsReference) {
  Fixture f;
  TrainConfig cfg = pref_config(0);
  const TrainResult result = train_preference(f.mdp, f.pairs, f.ref, cfg);
  EXPECT_EQ(result.policy.logits(), f.ref.logits());
  EXPECT_FALSE(result.policy.frozen());
  EXPECT_TRUE(result.metrics.empty());
}

TEST(TrainPreference, WinLoseMarginBecomesPositive) {
  Fixture f;
  const TrainConfig cfg = pref_config(30);
  EXPECT_EQ(mean_margin(f.pairs, f.ref, f.ref, cfg), 0.0);
  const TrainResult result = train_preference(f.mdp, f.pairs, f.ref, cfg);
  EXPECT_GT(mean_margin(f.pairs, result.policy, f.ref, cfg), 0.0);
}

TEST(TrainPreference, DeterministicAcrossRuns) {
  Fixture f;
  TrainConfig cfg = pref_config(10);
  cfg.stochastic_eval = true;
  const TrainResult a = train_preference(f.mdp, f.pairs, f.ref, cfg);
  const TrainResult b = train_preference(f.mdp, f.pairs, f.ref, cfg);
  EXPECT_EQ(a.policy, b.policy);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
    EXPECT_EQ(a.metrics[i].avg_reward, b.metrics[i].avg_reward);
    EXPECT_EQ(a.metrics[i].compounding_error, b.metrics[i].compounding_error);
  }
  cfg.seed = 99;
  EXPECT_NE(train_preference(f.mdp, f.pairs, f.ref, cfg).policy, a.policy);
}

TEST(TrainPreference, ReferenceIsUnchanged) {
  Fixture f;
  const Table before = f.ref.logits();
  for (LossKind kind : {LossKind::kDmpo, LossKind::kDpoTraj}) {
    TrainConfig cfg = pref_config(5);
    cfg.loss_kind = kind;
    train_preference(f.mdp, f.pairs, f.ref, cfg);
  }
  EXPECT_EQ(f.ref.logits(), before);
}

TEST(TrainPreference, SmallStepDecreasesLoss) {
  Fixture f;
  Rng rng(4);
  const TabularPolicy start = random_policy(6, 3, rng);
  TrainConfig cfg = pref_config(1);
  const std::span<const PreferencePair> batch(f.pairs.data(), 8);
  TabularPolicy p = start;
  const double before = dmpo_loss(batch, p, f.ref, cfg).value;
  p.apply(dmpo_grad(batch, p, f.ref, cfg), -1e-3);
  EXPECT_LT(dmpo_loss(batch, p, f.ref, cfg).value, before);
}

TEST(TrainPreference, EmitsOneCompleteRecordPerEpoch) {
  Fixture f;
  const TrainResult result = train_preference(f.mdp, f.pairs, f.ref, pref_config(7));
  ASSERT_EQ(result.metrics.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    const MetricsRecord& m = result.metrics[i];
    EXPECT_EQ(m.epoch, i + 1);
    EXPECT_TRUE(std::isfinite(m.loss));
    EXPECT_GE(m.avg_reward, 0.0);
    EXPECT_GE(m.avg_final_reward, 0.0);
    EXPECT_LE(m.avg_final_reward, 1.0);
    EXPECT_GE(m.compounding_error, 0.0);
    EXPECT_LE(m.compounding_error, 1.0);
    EXPECT_GT(m.pair_weight, 0.0);
    EXPECT_LT(m.pair_weight, 1.0);
  }
}

TEST(TrainPreference, RejectsBadSetup) {
  Fixture f;
  EXPECT_THROW(train_preference(f.mdp, f.pairs, f.ref.trainable_copy(), pref_config(1)),
               ConfigError);
  TrainConfig sft = pref_config(1);
  sft.loss_kind = LossKind::kSft;
  EXPECT_THROW(train_preference(f.mdp, f.pairs, f.ref, sft), ConfigError);
  EXPECT_THROW(train_preference(f.mdp, {}, f.ref, pref_config(1)), ValidationError);
  EXPECT_THROW(train_preference(f.mdp, f.pairs, TabularPolicy::uniform(3, 3).frozen_copy(),
                                pref_config(1)),
               ConfigError);
}

TEST(GammaSweep, RowsOrderedBySeedSettingGamma) {
  Fixture f;
  std::vector<SweepSeed> seeds{{3, f.ref, f.pairs, f.pairs}, {4, f.ref, f.pairs, f.pairs}};
  const std::vector<double> gammas{0.2, 0.8};
  const auto rows = gamma_sweep(f.mdp, seeds, pref_config(2), gammas);
  ASSERT_EQ(rows.size(), 2u * 2u * 2u);
  std::size_t i = 0;
  for (std::uint64_t seed : {3u, 4u}) {
    for (const char* setting : {"noisy", "clean"}) {
      for (double g : gammas) {
        EXPECT_EQ(rows[i].seed, seed);
        EXPECT_EQ(rows[i].label, setting);
        EXPECT_EQ(rows[i].axis, g);
        ++i;
      }
    }
  }
}

TEST(GammaSweep, SingleCellMatchesDirectTraining) {
  Fixture f;
  const TrainConfig cfg = pref_config(3);
  const auto rows = gamma_sweep(f.mdp, {{cfg.seed, f.ref, f.pairs, f.pairs}}, cfg, {cfg.gamma});
  const TrainResult direct = train_preference(f.mdp, f.pairs, f.ref, cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].avg_final_reward, direct.metrics.back().avg_final_reward);
  EXPECT_EQ(rows[0].compounding_error, direct.metrics.back().compounding_error);
  EXPECT_THROW(gamma_sweep(f.mdp, {}, cfg, {}), ValidationError);
  EXPECT_THROW(gamma_sweep(f.mdp, {}, cfg, {1.0}), ValidationError);
}

TEST(LengthSweep, TwoLossesPerBucket) {
  const Mdp mdp = chain(10, 0.1, 2, 12);
  const auto wins = successful_expert_trajectories(mdp, 12, 5);
  const TabularPolicy ref = train_sft(mdp, wins, sft_config(1.0, 5)).policy.frozen_copy();
  DatasetOptions options;
  options.n_pairs = 12;
  options.seed = 5;
  options.buckets = {4, 8, 12};
  options.noise = NoiseSpec{0.6, 0.3};
  const Dataset data = build_dataset(mdp, wins, ref, options);
  const auto rows = length_sweep(mdp, {{5, ref, data}}, pref_config(2));
  ASSERT_EQ(rows.size(), 6u);
  const std::vector<std::string> labels{"dmpo", "dmpo", "dmpo", "dpo_traj", "dpo_traj",
                                        "dpo_traj"};
  const std::vector<double> axes{4, 8, 12, 4, 8, 12};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(rows[i].label, labels[i]);
    EXPECT_EQ(rows[i].axis, axes[i]);
  }
}

TEST(LengthSweep, SingleBucketTrainsBothLossesOnSameData) {
  const Mdp mdp = chain(10, 0.1, 2, 12);
  const auto wins = successful_expert_trajectories(mdp, 8, 6);
  const TabularPolicy ref = train_sft(mdp, wins, sft_config(1.0, 5)).policy.frozen_copy();
  DatasetOptions options;
  options.n_pairs = 8;
  options.seed = 6;
  options.buckets = {12};
  const Dataset data = build_dataset(mdp, wins, ref, options);
  TrainConfig cfg = pref_config(2);
  const auto rows = length_sweep(mdp, {{6, ref, data}}, cfg);
  ASSERT_EQ(rows.size(), 2u);
  cfg.seed = 6;
  cfg.loss_kind = LossKind::kDpoTraj;
  EXPECT_EQ(rows[1].avg_final_reward,
            train_preference(mdp, data.pairs, ref, cfg).metrics.back().avg_final_reward);
}

TEST(Summaries, MeansAndBestAxis) {
  const std::vector<SweepRow> rows{{"noisy", 0.1, 0, 0.2, 0.5}, {"noisy", 0.5, 0, 0.6, 0.1},
                                   {"noisy", 0.1, 1, 0.4, 0.3}, {"noisy", 0.5, 1, 0.0, 0.1},
                                   {"clean", 0.1, 0, 0.5, 0.0}, {"clean", 0.5, 0, 0.9, 0.0}};
  const auto cells = summarize(rows);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].label, "noisy");
  EXPECT_NEAR(cells[0].mean_reward, 0.3, 1e-15);
  EXPECT_NEAR(cells[0].mean_compounding_error, 0.4, 1e-15);
  EXPECT_NEAR(cells[1].mean_reward, 0.3, 1e-15);
  // Tie at 0.3: the smaller axis value wins.
  EXPECT_EQ(best_axis(cells, "noisy"), 0.1);
  EXPECT_EQ(best_axis(cells, "clean"), 0.5);
  EXPECT_THROW(best_axis(cells, "dmpo"), ValidationError);
}

TEST(Evaluate, GreedyExpertOnDeterministicChain) {
  const Mdp mdp = chain(5, 0.0);
  const auto expert = expert_trajectories(mdp, 3, 7);
  TrainConfig cfg;
  cfg.eval_episodes = 10;
  const Evaluation eval =
      evaluate(mdp, expert_policy(mdp), cfg, state_action_support(expert));
  EXPECT_EQ(eval.avg_final_reward, 1.0);
  EXPECT_EQ(eval.compounding_error, 0.0);
  EXPECT_NEAR(eval.avg_reward, std::pow(0.9, 3), 1e-12);
}
