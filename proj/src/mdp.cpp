#include "dmpo/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmpo/error.hpp"

namespace dmpo {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

Mdp::Mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
         Table reward, std::vector<double> initial_dist,
         std::vector<std::size_t> terminal_states, std::size_t max_horizon)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      initial_dist_(std::move(initial_dist)),
      terminal_states_(std::move(terminal_states)),
      terminal_mask_(n_states, false),
      max_horizon_(max_horizon) {
  require(n_states_ > 0, "mdp: n_states must be positive");
  require(n_actions_ > 0, "mdp: n_actions must be positive");
  require(max_horizon_ > 0, "mdp: max_horizon must be positive");
  require(transition_.size() == n_states_ * n_actions_ * n_states_,
          "mdp: transition tensor has wrong size");
  require(reward_.rows() == n_states_ && reward_.cols() == n_actions_,
          "mdp: reward table has wrong shape");
  require(initial_dist_.size() == n_states_, "mdp: initial_dist has wrong size");

  std::sort(terminal_states_.begin(), terminal_states_.end());
  terminal_states_.erase(std::unique(terminal_states_.begin(), terminal_states_.end()),
                         terminal_states_.end());
  for (std::size_t s : terminal_states_) {
    require(s < n_states_, "mdp: terminal state out of range");
    terminal_mask_[s] = true;
  }

  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      double total = 0.0;
      for (double p : next_state_dist(s, a)) {
        require(std::isfinite(p) && p >= 0.0, "mdp: negative transition probability");
        total += p;
      }
      require(terminal_mask_[s] || std::abs(total - 1.0) <= kProbTolerance,
              "mdp: transition row (" + std::to_string(s) + "," + std::to_string(a) +
                  ") does not sum to 1");
      const double r = reward_(s, a);
      require(std::isfinite(r) && r >= 0.0 && r <= 1.0, "mdp: reward outside [0,1]");
    }
  }

  double total = 0.0;
  for (std::size_t s = 0; s < n_states_; ++s) {
    const double p = initial_dist_[s];
    require(std::isfinite(p) && p >= 0.0, "mdp: negative initial probability");
    require(p == 0.0 || !terminal_mask_[s], "mdp: initial mass on a terminal state");
    total += p;
  }
  require(std::abs(total - 1.0) <= kProbTolerance, "mdp: initial_dist does not sum to 1");
}

bool Mdp::is_deterministic() const {
  for (double p : transition_) {
    if (p != 0.0 && p != 1.0) return false;
  }
  int starts = 0;
  for (double p : initial_dist_) starts += p > 0.0;
  return starts == 1;
}

Mdp Mdp::with_horizon(std::size_t max_horizon) const {
  return Mdp(n_states_, n_actions_, transition_, reward_, initial_dist_, terminal_states_,
             max_horizon);
}

Mdp Mdp::with_reward(Table reward) const {
  return Mdp(n_states_, n_actions_, transition_, std::move(reward), initial_dist_,
             terminal_states_, max_horizon_);
}

void validate_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0, 1), got " + std::to_string(gamma));
  }
}

void validate_trajectory(const Trajectory& traj, const Mdp& mdp) {
  require(traj.length() >= 1, "trajectory: empty");
  require(traj.length() <= mdp.max_horizon(), "trajectory: longer than max_horizon");
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const Step& step = traj.steps[t];
    require(step.state < mdp.n_states() && step.action < mdp.n_actions(),
            "trajectory: index out of range at step " + std::to_string(t));
    require(!mdp.is_terminal(step.state),
            "trajectory: acts in a terminal state at step " + std::to_string(t));
    if (t + 1 < traj.length()) {
      require(mdp.transition(step.state, step.action, traj.steps[t + 1].state) > 0.0,
              "trajectory: unreachable transition at step " + std::to_string(t));
    }
  }
}

double discounted_return(const Trajectory& traj, const Mdp& mdp, double gamma) {
  validate_gamma(gamma);
  double total = 0.0;
  double discount = 1.0;
  for (const Step& step : traj.steps) {
    if (step.state >= mdp.n_states() || step.action >= mdp.n_actions()) {
      throw ValidationError("discounted_return: index out of range");
    }
    total += discount * mdp.reward(step.state, step.action);
    discount *= gamma;
  }
  return total;
}

double task_reward(const Trajectory& traj, const Mdp& mdp) {
  double total = 0.0;
  for (const Step& step : traj.steps) total += mdp.reward(step.state, step.action);
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace dmpo
