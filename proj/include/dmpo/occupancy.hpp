#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <utility>

#include "dmpo/mdp.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/table.hpp"

namespace dmpo {

/// State-action occupancy measure d(s,a): a probability table over
/// state-action pairs together with the horizon and discount it was built
/// with.
struct Saom {
  Table d;
  std::size_t horizon = 0;
  double gamma = 0.0;

  /// Throws ValidationError unless entries are non-negative and sum to 1
  /// within 1e-10.
  void validate() const;
};

struct SaomSolution {
  Saom d_star;
  double partition_z = 0.0;
  double objective_value = 0.0;
};

/// (1 - gamma) / (1 - gamma^T), continuous at gamma = 0 (value 1).
double length_normalizer(std::size_t length, double gamma);

/// Exact occupancy measure by forward dynamic programming over
/// p_t(s,a) = P(s_t = s, a_t = a). Each episode is normalized by its own
/// realized length L (terminal entry or the horizon cap), i.e.
///   d(s,a) = E[ (1-g)/(1-g^L) * sum_{t<L} g^t 1{s_t = s, a_t = a} ],
/// which reduces to (1-g)/(1-g^T) sum_t g^t p_t(s,a) when no terminal state
/// is reachable within T steps.
Saom saom_exact(const Mdp& mdp, const TabularPolicy& policy, std::size_t horizon,
                double gamma);

/// Monte Carlo estimate of the same quantity from n sampled episodes.
Saom saom_monte_carlo(const Mdp& mdp, const TabularPolicy& policy, std::size_t horizon,
                      double gamma, std::size_t n, std::uint64_t seed);

/// Maximizer of E_d[r] - beta KL(d || d_ref) over distributions on (s,a):
/// d*(s,a) = d_ref(s,a) exp(r(s,a)/beta) / Z with a single scalar Z.
SaomSolution optimal_saom(const Mdp& mdp, const Saom& ref_saom, double beta);

/// E_d[r] - beta KL(d || d_ref), with 0 log 0 = 0. Infinite KL (mass where
/// d_ref is zero) yields -infinity.
double saom_objective(const Table& d, const Table& d_ref, const Table& reward, double beta);

/// r(s,a) = beta log(d*(s,a)/d_ref(s,a)) + beta log Z on the support of
/// d_ref; entries off the support are left at 0. Throws SupportMismatchError
/// where d_ref > 0 but d* = 0, or d_ref = 0 but d* > 0.
Table implied_reward(const Table& d_star, const Table& d_ref, double beta,
                     double partition_z);

/// Largest |d^{pi}(s,a) - d(s,a)| where pi(a|s) is proportional to d(s,a):
/// zero exactly when d is realizable by some policy in this MDP.
double realizability_gap(const Mdp& mdp, const Saom& d);

using StateActionSet = std::set<std::pair<std::size_t, std::size_t>>;

StateActionSet state_action_support(std::span<const Trajectory> trajs);

/// Fraction of steps whose (s_t, a_t) never occurs in the expert set.
double compounding_error(const Trajectory& traj, const StateActionSet& expert_support);
double compounding_error(const Trajectory& traj, std::span<const Trajectory> expert_trajs);

}  // namespace dmpo
