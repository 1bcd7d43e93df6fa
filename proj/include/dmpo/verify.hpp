#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dmpo/losses.hpp"
#include "dmpo/mdp.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/random.hpp"

namespace dmpo {

/// Random MDP with Dirichlet(1) transition rows, uniform rewards in [0,1]
/// and, when `with_terminal`, the last state terminal.
Mdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon, Rng& rng,
               bool with_terminal = false);

/// Logits drawn uniformly from [-scale, scale].
TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng,
                            double scale = 2.0);

/// Random valid trajectory of the given length (stops early on terminal
/// entry) under uniform random actions.
Trajectory random_trajectory(const Mdp& mdp, std::size_t length, Rng& rng);

/// Random pair whose members share s0.
PreferencePair random_pair(const Mdp& mdp, std::size_t max_length, Rng& rng);

/// Central finite-difference gradient of f over every logit of `policy`.
Table finite_difference_grad(const TabularPolicy& policy,
                             const std::function<double(const TabularPolicy&)>& f,
                             double step = 1e-5);

/// max_i |a_i - b_i| / max(max_i |b_i|, 1e-300).
double max_norm_rel_error(const Table& a, const Table& b);

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Discount function under test, phi(t, T, gamma).
using PhiFn = std::function<double(std::size_t, std::size_t, double)>;

struct VerifyOptions {
  PhiFn phi_impl = [](std::size_t t, std::size_t len, double g) { return phi(t, len, g); };
  std::uint64_t seed = 20240601;
};

std::vector<CheckResult> run_verification(const VerifyOptions& options = {});

/// Individual checks, exposed for targeted tests.
CheckResult check_phi_law(const VerifyOptions& options);
CheckResult check_first_step_degeneracy(const VerifyOptions& options);
CheckResult check_gradient(const VerifyOptions& options);
CheckResult check_saom_normalization(const VerifyOptions& options);
CheckResult check_saom_monte_carlo(const VerifyOptions& options);
CheckResult check_closed_form(const VerifyOptions& options);
CheckResult check_reward_round_trip(const VerifyOptions& options);
CheckResult check_bradley_terry(const VerifyOptions& options);

}  // namespace dmpo
