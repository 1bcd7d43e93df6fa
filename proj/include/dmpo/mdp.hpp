#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dmpo/table.hpp"

namespace dmpo {

inline constexpr double kProbTolerance = 1e-12;

/// Finite MDP with an explicit transition tensor P(s'|s,a), a reward table
/// r(s,a) in [0,1], an initial distribution and a horizon cap. Entering a
/// terminal state ends an episode. Immutable once constructed.
class Mdp {
 public:
  Mdp() = default;

  /// Validates every invariant and throws ValidationError on violation.
  /// `transition` is flattened as [s][a][s'].
  Mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
      Table reward, std::vector<double> initial_dist,
      std::vector<std::size_t> terminal_states, std::size_t max_horizon);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t max_horizon() const { return max_horizon_; }

  std::span<const double> next_state_dist(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * n_actions_ + a) * n_states_ + next];
  }
  double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
  const Table& reward_table() const { return reward_; }
  std::span<const double> initial_dist() const { return initial_dist_; }
  bool is_terminal(std::size_t s) const { return terminal_mask_[s]; }
  const std::vector<std::size_t>& terminal_states() const { return terminal_states_; }
  std::span<const double> transition_flat() const { return transition_; }

  bool is_deterministic() const;

  /// Copy with a different horizon cap.
  Mdp with_horizon(std::size_t max_horizon) const;
  /// Copy with the reward table replaced (still validated).
  Mdp with_reward(Table reward) const;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> transition_;
  Table reward_;
  std::vector<double> initial_dist_;
  std::vector<std::size_t> terminal_states_;
  std::vector<bool> terminal_mask_;
  std::size_t max_horizon_ = 0;
};

struct Step {
  std::size_t state = 0;
  std::size_t action = 0;
  bool operator==(const Step&) const = default;
};

/// Ordered (s_t, a_t) pairs for t = 0..T-1.
struct Trajectory {
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  std::size_t initial_state() const { return steps.front().state; }
  bool operator==(const Trajectory&) const = default;
};

/// Throws ValidationError if `traj` is empty, indexes outside `mdp`, exceeds
/// the horizon cap, or contains a transition of zero probability.
void validate_trajectory(const Trajectory& traj, const Mdp& mdp);

/// Throws ValidationError unless gamma is in [0, 1).
void validate_gamma(double gamma);

/// Sum_t gamma^t r(s_t, a_t).
double discounted_return(const Trajectory& traj, const Mdp& mdp, double gamma);

/// Undiscounted task reward of a trajectory, clipped to [0, 1]. With
/// terminal-only rewards this is exactly the reward earned on completion.
double task_reward(const Trajectory& traj, const Mdp& mdp);

/// Environment identifier plus numeric parameters, e.g. {"chain", {n: 10}}.
struct EnvSpec {
  std::string name;
  std::map<std::string, double> params;
};

/// Builds one of the built-in environments: `chain`, `shop`, `grid`.
/// Unknown names raise ConfigError; bad parameters raise ValidationError.
Mdp make_env(const EnvSpec& spec);

namespace envs {

struct ChainParams {
  std::size_t n = 10;
  double slip = 0.0;
  std::size_t actions = 3;
  std::size_t start = 0;
  std::size_t horizon = 0;  // 0 selects 2 * (n - 1)
  bool dense = false;
};

/// Linear chain 0..n-1 with the goal n-1 terminal. At state s exactly one
/// action, (s + 1) mod actions, advances; it slips back one state with
/// probability `slip` (the step into the goal never slips). Every other
/// action slips back deterministically. Completing the chain pays 1; with
/// `dense`, each advancing action pays 1/(n-1) instead.
Mdp chain(const ChainParams& p);
std::size_t chain_advance_action(std::size_t state, std::size_t actions);

struct ShopParams {
  std::size_t depth = 3;
  std::size_t branching = 3;
  double slip = 0.0;
  std::size_t horizon = 0;  // 0 selects depth + 1
};

/// Complete `branching`-ary tree of `depth` choice levels whose leaves each
/// offer `branching` purchase actions; every purchase leads to one shared
/// terminal state. Purchase rewards grade how many of the depth + 1 choices
/// match a fixed target path (partial credit in [0, 1]).
Mdp shop(const ShopParams& p);
std::size_t shop_tree_states(std::size_t depth, std::size_t branching);

struct GridParams {
  std::size_t width = 4;
  std::size_t height = 4;
  double slip = 0.0;
  std::size_t horizon = 0;  // 0 selects 2 * (width + height)
};

/// width x height grid, actions up/down/left/right, start at (0, 0). Any
/// action taken in the goal cell (width-1, height-1) pays 1 and moves to a
/// dedicated terminal state. With probability `slip` a move goes in a
/// uniformly random direction.
Mdp grid(const GridParams& p);

}  // namespace envs

}  // namespace dmpo
