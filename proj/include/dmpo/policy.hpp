#pragma once

#include <cstddef>
#include <vector>

#include "dmpo/mdp.hpp"
#include "dmpo/table.hpp"

namespace dmpo {

/// Tabular softmax policy pi(a|s) = softmax(logits[s])[a]. A frozen policy
/// plays the role of a reference or expert and refuses updates.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  /// Throws ValidationError on empty shape or non-finite logits.
  explicit TabularPolicy(Table logits, bool frozen = false);

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
  /// Near-deterministic policy taking actions[s] with probability
  /// 1 - (A-1) * exp(-margin).
  static TabularPolicy deterministic(const std::vector<std::size_t>& actions,
                                     std::size_t n_actions, double margin = 50.0);

  std::size_t n_states() const { return logits_.rows(); }
  std::size_t n_actions() const { return logits_.cols(); }
  const Table& logits() const { return logits_; }
  bool frozen() const { return frozen_; }

  std::vector<double> probs(std::size_t s) const;
  double prob(std::size_t s, std::size_t a) const;
  /// Lowest index among maximal logits.
  std::size_t greedy_action(std::size_t s) const;

  TabularPolicy frozen_copy() const { return TabularPolicy(logits_, true); }
  TabularPolicy trainable_copy() const { return TabularPolicy(logits_, false); }

  /// logits += scale * delta. Throws UpdateRefusedError when frozen.
  void apply(const Table& delta, double scale);

  bool operator==(const TabularPolicy&) const = default;

 private:
  Table logits_;
  bool frozen_ = false;
};

/// Throws ConfigError unless the policy covers exactly the MDP's states and
/// actions.
void check_dimensions(const TabularPolicy& policy, const Mdp& mdp);
void check_dimensions(const TabularPolicy& policy, const TabularPolicy& ref);

/// log pi(a|s) using max-subtraction. Throws ValidationError on bad indices.
double log_prob(const TabularPolicy& policy, std::size_t s, std::size_t a);

/// [log pi(a_t|s_t) - log pi_ref(a_t|s_t)] for t = 0..T-1.
std::vector<double> traj_log_ratio_terms(const TabularPolicy& policy,
                                         const TabularPolicy& ref,
                                         const Trajectory& traj);

/// Gradient of log pi(a|s) with respect to the logits. Only row `state` is
/// nonzero: d/d logits[s][b] = 1{b = a} - pi(b|s).
struct RowGradient {
  std::size_t state = 0;
  std::vector<double> values;

  void add_to(Table& grad, double scale) const;
};

/// Throws UpdateRefusedError on a frozen policy.
RowGradient grad_log_prob(const TabularPolicy& policy, std::size_t s, std::size_t a);

}  // namespace dmpo
