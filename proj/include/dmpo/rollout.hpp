#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dmpo/mdp.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/random.hpp"

namespace dmpo {

struct RolloutReport {
  std::vector<Trajectory> trajectories;
  double avg_return = 0.0;
  double avg_final_reward = 0.0;
};

/// Chooses a_t given s_t, t, the previous action (if any) and the stream.
using ActionChooser = std::function<std::size_t(
    std::size_t state, std::size_t t, std::optional<std::size_t> prev_action, Rng& rng)>;

/// Samples one episode from `start`, stopping on terminal entry or after
/// `horizon` steps, whichever comes first.
Trajectory sample_trajectory(const Mdp& mdp, std::size_t start, std::size_t horizon,
                             const ActionChooser& choose, Rng& rng);

/// s0 ~ initial_dist.
std::size_t sample_initial_state(const Mdp& mdp, Rng& rng);

/// Sampling (or argmax, for temperature_zero) chooser for a policy.
ActionChooser policy_chooser(const TabularPolicy& policy, bool temperature_zero);

/// Samples n episodes; trajectory i uses the stream keyed by (seed, i), so
/// the result does not depend on evaluation order. avg_return uses `gamma`.
/// Throws ConfigError when policy and mdp dimensions differ.
RolloutReport rollout(const Mdp& mdp, const TabularPolicy& policy, std::size_t n,
                      std::uint64_t seed, bool temperature_zero, double gamma = 0.99);

}  // namespace dmpo
