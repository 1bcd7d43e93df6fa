#include "dmpo/rollout.hpp"

#include "dmpo/error.hpp"

namespace dmpo {

std::size_t sample_initial_state(const Mdp& mdp, Rng& rng) {
  return rng.categorical(mdp.initial_dist());
}

Trajectory sample_trajectory(const Mdp& mdp, std::size_t start, std::size_t horizon,
                             const ActionChooser& choose, Rng& rng) {
  if (start >= mdp.n_states() || mdp.is_terminal(start)) {
    throw ValidationError("rollout: invalid start state");
  }
  Trajectory traj;
  std::size_t state = start;
  std::optional<std::size_t> prev;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t action = choose(state, t, prev, rng);
    traj.steps.push_back({state, action});
    state = rng.categorical(mdp.next_state_dist(state, action));
    prev = action;
    if (mdp.is_terminal(state)) break;
  }
  return traj;
}

ActionChooser policy_chooser(const TabularPolicy& policy, bool temperature_zero) {
  if (temperature_zero) {
    return [&policy](std::size_t s, std::size_t, std::optional<std::size_t>, Rng&) {
      return policy.greedy_action(s);
    };
  }
  return [&policy](std::size_t s, std::size_t, std::optional<std::size_t>, Rng& rng) {
    const auto probs = policy.probs(s);
    return rng.categorical(probs);
  };
}

RolloutReport rollout(const Mdp& mdp, const TabularPolicy& policy, std::size_t n,
                      std::uint64_t seed, bool temperature_zero, double gamma) {
  if (n == 0) throw ValidationError("rollout: n must be at least 1");
  check_dimensions(policy, mdp);
  validate_gamma(gamma);

  const ActionChooser choose = policy_chooser(policy, temperature_zero);
  RolloutReport report;
  report.trajectories.reserve(n);
  double return_sum = 0.0;
  double final_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t start = sample_initial_state(mdp, rng);
    Trajectory traj = sample_trajectory(mdp, start, mdp.max_horizon(), choose, rng);
    return_sum += discounted_return(traj, mdp, gamma);
    final_sum += task_reward(traj, mdp);
    report.trajectories.push_back(std::move(traj));
  }
  report.avg_return = return_sum / static_cast<double>(n);
  report.avg_final_reward = final_sum / static_cast<double>(n);
  return report;
}

}  // namespace dmpo
