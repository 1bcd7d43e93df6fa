#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dmpo/datagen.hpp"
#include "dmpo/losses.hpp"
#include "dmpo/mdp.hpp"
#include "dmpo/occupancy.hpp"
#include "dmpo/policy.hpp"

namespace dmpo {

struct MetricsRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double avg_reward = 0.0;
  double avg_final_reward = 0.0;
  double compounding_error = 0.0;
  double pair_weight = 0.0;
};

struct TrainResult {
  TabularPolicy policy;
  std::vector<MetricsRecord> metrics;
};

struct Evaluation {
  double avg_reward = 0.0;
  double avg_final_reward = 0.0;
  double compounding_error = 0.0;
};

/// Rollout evaluation of `policy` with cfg.eval_episodes episodes (argmax
/// actions unless cfg.stochastic_eval); returns use cfg.gamma. The episode
/// streams depend only on cfg.seed, so successive epochs are compared on the
/// same environment randomness.
Evaluation evaluate(const Mdp& mdp, const TabularPolicy& policy, const TrainConfig& cfg,
                    const StateActionSet& expert_support);

/// Full-batch gradient descent on the SFT loss from zero logits. The result
/// is trainable; use frozen_copy() to obtain a reference policy.
TrainResult train_sft(const Mdp& mdp, const std::vector<Trajectory>& expert,
                      const TrainConfig& cfg);

/// Mini-batch gradient descent on cfg.loss_kind (dmpo or dpo_traj), starting
/// from a copy of `ref`. Each epoch shuffles with a stream keyed by
/// (cfg.seed, epoch) and is followed by one evaluation. Throws ConfigError if
/// `ref` is not frozen or loss_kind is sft.
TrainResult train_preference(const Mdp& mdp, const std::vector<PreferencePair>& dataset,
                             const TabularPolicy& ref, const TrainConfig& cfg);

struct SweepRow {
  std::string label;  // setting or loss kind
  double axis = 0.0;  // gamma or bucket ceiling
  std::uint64_t seed = 0;
  double avg_final_reward = 0.0;
  double compounding_error = 0.0;
};

/// Inputs shared by all cells of one seed: a frozen reference policy and
/// the datasets to train on.
struct SweepSeed {
  std::uint64_t seed = 0;
  TabularPolicy ref;
  std::vector<PreferencePair> noisy;
  std::vector<PreferencePair> clean;
};

/// One DMPO run per (seed, setting, gamma); rows ordered by seed, then
/// setting (noisy, clean), then gamma. Cells run in parallel.
std::vector<SweepRow> gamma_sweep(const Mdp& mdp, const std::vector<SweepSeed>& seeds,
                                  const TrainConfig& cfg, const std::vector<double>& gammas);

struct LengthSweepSeed {
  std::uint64_t seed = 0;
  TabularPolicy ref;
  /// Noisy dataset built with length buckets; bucket b holds the
  /// consecutive block of pairs [b * per_bucket, (b+1) * per_bucket).
  Dataset dataset;
};

/// dmpo and dpo_traj runs per (seed, bucket); rows ordered by seed, loss
/// kind (dmpo, dpo_traj), bucket.
std::vector<SweepRow> length_sweep(const Mdp& mdp, const std::vector<LengthSweepSeed>& seeds,
                                   const TrainConfig& cfg);

/// Mean avg_final_reward per (label, axis) across seeds, in first-seen order.
struct SweepCell {
  std::string label;
  double axis = 0.0;
  double mean_reward = 0.0;
  double mean_compounding_error = 0.0;
};
std::vector<SweepCell> summarize(const std::vector<SweepRow>& rows);

/// Axis value with the largest mean reward for `label`; ties go to the
/// smallest axis value.
double best_axis(const std::vector<SweepCell>& cells, const std::string& label);

}  // namespace dmpo
