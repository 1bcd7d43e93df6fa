#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmpo/losses.hpp"
#include "dmpo/mdp.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/random.hpp"

namespace dmpo {

enum class Setting { kNoisy, kClean };

std::string to_string(Setting setting);
Setting parse_setting(const std::string& name);

/// Degenerate-generation model for noisy lose trajectories: at each step,
/// repeat the previous action with probability p_rep, take a uniformly
/// random action with probability p_rand, otherwise follow the base policy.
struct NoiseSpec {
  double p_rep = 0.3;
  double p_rand = 0.3;

  void validate() const;
};

struct LengthBucket {
  std::size_t max_length = 0;
  std::size_t pairs = 0;
  bool operator==(const LengthBucket&) const = default;
};

struct DatasetManifest {
  Setting setting = Setting::kNoisy;
  std::size_t pairs = 0;
  std::vector<LengthBucket> length_buckets;
  std::uint64_t seed = 0;
  std::string env_name;

  /// Bucket counts must sum to `pairs` and be equal.
  void validate() const;
};

struct DatasetOptions {
  Setting setting = Setting::kNoisy;
  std::size_t n_pairs = 100;
  std::uint64_t seed = 0;
  /// Lose-length ceilings, strictly increasing. Bucket i accepts lengths in
  /// (ceiling[i-1], ceiling[i]].
  std::vector<std::size_t> buckets;
  NoiseSpec noise;
  /// Discount used to order win and lose returns in the clean setting.
  double return_gamma = 0.9;
  std::string env_name;
};

struct Dataset {
  std::vector<PreferencePair> pairs;
  DatasetManifest manifest;
};

inline constexpr double kExpertDiscount = 0.99;

/// Optimal deterministic action per state from value iteration on the
/// discounted problem (discount kExpertDiscount, iterated to a fixed point).
/// Ties within 1e-12 go to the lowest action index.
std::vector<std::size_t> optimal_actions(const Mdp& mdp);

/// Frozen near-deterministic policy taking optimal_actions(mdp).
TabularPolicy expert_policy(const Mdp& mdp);

/// n rollouts of the optimal policy; rollout i uses the stream keyed by
/// (seed, i).
std::vector<Trajectory> expert_trajectories(const Mdp& mdp, std::size_t n,
                                            std::uint64_t seed);

/// Expert rollouts that earn positive task reward, drawn from the streams
/// (seed, 0), (seed, 1), ... until n are collected. These serve as win
/// trajectories. Throws GenerationExhaustedError if fewer than 1% succeed.
std::vector<Trajectory> successful_expert_trajectories(const Mdp& mdp, std::size_t n,
                                                       std::uint64_t seed);

/// One noisy episode from `start`, capped at `horizon` steps.
Trajectory noisy_episode(const Mdp& mdp, const TabularPolicy& base_policy,
                         std::size_t start, std::size_t horizon, const NoiseSpec& noise,
                         Rng& rng);

/// n base-policy rollouts corrupted by repetition and random actions.
std::vector<Trajectory> noisy_lose_trajectories(const Mdp& mdp,
                                                const TabularPolicy& base_policy,
                                                std::size_t n, std::uint64_t seed,
                                                const NoiseSpec& noise);

/// True if some action occurs at `run` or more consecutive steps.
bool has_repeated_actions(const Trajectory& traj, std::size_t run = 3);

/// For each win, a base-policy rollout from the win's initial state that has
/// no run of 3 identical actions and a discounted return (`return_gamma`)
/// strictly below the win's. Throws GenerationExhaustedError once the
/// acceptance rate drops below 1%.
std::vector<Trajectory> clean_lose_for(const Mdp& mdp, const TabularPolicy& base_policy,
                                       const std::vector<Trajectory>& wins,
                                       std::uint64_t seed, double return_gamma = 0.9);

/// clean_lose_for against n expert trajectories drawn with the same seed.
std::vector<Trajectory> clean_lose_trajectories(const Mdp& mdp,
                                                const TabularPolicy& base_policy,
                                                std::size_t n, std::uint64_t seed);

/// Pairs every win trajectory with a lose trajectory from the same initial
/// state, generated from `base_policy` under `options.setting`.
Dataset build_dataset(const Mdp& mdp, const std::vector<Trajectory>& wins,
                      const TabularPolicy& base_policy, const DatasetOptions& options);

}  // namespace dmpo
