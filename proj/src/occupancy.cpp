#include "dmpo/occupancy.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "dmpo/error.hpp"
#include "dmpo/random.hpp"
#include "dmpo/rollout.hpp"

namespace dmpo {
namespace {

void validate_horizon(std::size_t horizon) {
  if (horizon == 0) throw ValidationError("occupancy: horizon must be at least 1");
}

}  // namespace

void Saom::validate() const {
  double total = 0.0;
  for (double v : d.flat()) {
    if (!(v >= 0.0)) throw ValidationError("saom: negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw ValidationError("saom: entries sum to " + std::to_string(total));
  }
}

double length_normalizer(std::size_t length, double gamma) {
  if (length == 0) throw ValidationError("length_normalizer: length must be positive");
  if (gamma == 0.0) return 1.0;
  // (1 - g) / (1 - g^L) via expm1 keeps precision for g near 1.
  const double log_g = std::log(gamma);
  return std::expm1(log_g) / std::expm1(static_cast<double>(length) * log_g);
}

Saom saom_exact(const Mdp& mdp, const TabularPolicy& policy, std::size_t horizon,
                double gamma) {
  validate_horizon(horizon);
  validate_gamma(gamma);
  check_dimensions(policy, mdp);

  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  std::vector<std::vector<double>> pi(ns);
  for (std::size_t s = 0; s < ns; ++s) pi[s] = policy.probs(s);

  // Forward pass: p[t](s,a).
  std::vector<Table> p(horizon, Table(ns, na, 0.0));
  for (std::size_t s = 0; s < ns; ++s) {
    const double mass = mdp.initial_dist()[s];
    if (mass == 0.0) continue;
    for (std::size_t a = 0; a < na; ++a) p[0](s, a) = mass * pi[s][a];
  }
  for (std::size_t t = 0; t + 1 < horizon; ++t) {
    std::vector<double> next(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        const double mass = p[t](s, a);
        if (mass == 0.0) continue;
        const auto dist = mdp.next_state_dist(s, a);
        for (std::size_t s2 = 0; s2 < ns; ++s2) next[s2] += mass * dist[s2];
      }
    }
    for (std::size_t s2 = 0; s2 < ns; ++s2) {
      if (mdp.is_terminal(s2) || next[s2] == 0.0) continue;
      for (std::size_t a2 = 0; a2 < na; ++a2) p[t + 1](s2, a2) = next[s2] * pi[s2][a2];
    }
  }

  // Backward pass: w[t](s,a) = E[(1-g)/(1-g^L) | s_t = s, a_t = a].
  std::vector<Table> w(horizon, Table(ns, na, 0.0));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) w[horizon - 1](s, a) = length_normalizer(horizon, gamma);
  }
  for (std::size_t t = horizon - 1; t-- > 0;) {
    const double stop = length_normalizer(t + 1, gamma);
    std::vector<double> cont(ns, 0.0);
    for (std::size_t s2 = 0; s2 < ns; ++s2) {
      if (mdp.is_terminal(s2)) {
        cont[s2] = stop;
        continue;
      }
      for (std::size_t a2 = 0; a2 < na; ++a2) cont[s2] += pi[s2][a2] * w[t + 1](s2, a2);
    }
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        const auto dist = mdp.next_state_dist(s, a);
        double v = 0.0;
        for (std::size_t s2 = 0; s2 < ns; ++s2) v += dist[s2] * cont[s2];
        w[t](s, a) = v;
      }
    }
  }

  Saom out{Table(ns, na, 0.0), horizon, gamma};
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    if (discount == 0.0) break;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) out.d(s, a) += discount * p[t](s, a) * w[t](s, a);
    }
    discount *= gamma;
  }
  return out;
}

Saom saom_monte_carlo(const Mdp& mdp, const TabularPolicy& policy, std::size_t horizon,
                      double gamma, std::size_t n, std::uint64_t seed) {
  validate_horizon(horizon);
  validate_gamma(gamma);
  check_dimensions(policy, mdp);
  if (n == 0) throw ValidationError("saom_monte_carlo: n must be at least 1");

  const ActionChooser choose = policy_chooser(policy, false);
  Saom out{Table(mdp.n_states(), mdp.n_actions(), 0.0), horizon, gamma};
  const double per_episode = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t start = sample_initial_state(mdp, rng);
    const Trajectory traj = sample_trajectory(mdp, start, horizon, choose, rng);
    const double scale = per_episode * length_normalizer(traj.length(), gamma);
    double discount = 1.0;
    for (const Step& step : traj.steps) {
      out.d(step.state, step.action) += scale * discount;
      discount *= gamma;
    }
  }
  return out;
}

double saom_objective(const Table& d, const Table& d_ref, const Table& reward,
                      double beta) {
  double expected = 0.0;
  double kl = 0.0;
  for (std::size_t s = 0; s < d.rows(); ++s) {
    for (std::size_t a = 0; a < d.cols(); ++a) {
      const double x = d(s, a);
      if (x == 0.0) continue;
      if (d_ref(s, a) == 0.0) return -std::numeric_limits<double>::infinity();
      expected += x * reward(s, a);
      kl += x * std::log(x / d_ref(s, a));
    }
  }
  return expected - beta * kl;
}

SaomSolution optimal_saom(const Mdp& mdp, const Saom& ref_saom, double beta) {
  if (!(beta > 0.0)) throw ValidationError("optimal_saom: beta must be positive");
  const Table& ref = ref_saom.d;
  if (ref.rows() != mdp.n_states() || ref.cols() != mdp.n_actions()) {
    throw ConfigError("optimal_saom: reference measure does not match the mdp");
  }

  // Shift by the largest exponent so exp() cannot overflow for small beta.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < ref.rows(); ++s) {
    for (std::size_t a = 0; a < ref.cols(); ++a) {
      if (ref(s, a) > 0.0) shift = std::max(shift, mdp.reward(s, a) / beta);
    }
  }
  if (!std::isfinite(shift)) throw ValidationError("optimal_saom: reference measure is empty");

  SaomSolution sol;
  sol.d_star = Saom{Table(ref.rows(), ref.cols(), 0.0), ref_saom.horizon, ref_saom.gamma};
  double scaled_z = 0.0;
  for (std::size_t s = 0; s < ref.rows(); ++s) {
    for (std::size_t a = 0; a < ref.cols(); ++a) {
      if (ref(s, a) == 0.0) continue;
      const double tilt = ref(s, a) * std::exp(mdp.reward(s, a) / beta - shift);
      sol.d_star.d(s, a) = tilt;
      scaled_z += tilt;
    }
  }
  for (double& v : sol.d_star.d.flat()) v /= scaled_z;
  sol.partition_z = scaled_z * std::exp(shift);
  sol.objective_value = saom_objective(sol.d_star.d, ref, mdp.reward_table(), beta);
  return sol;
}

Table implied_reward(const Table& d_star, const Table& d_ref, double beta,
                     double partition_z) {
  if (!(beta > 0.0)) throw ValidationError("implied_reward: beta must be positive");
  if (!(partition_z > 0.0)) throw ValidationError("implied_reward: Z must be positive");
  if (!d_star.same_shape(d_ref)) throw ConfigError("implied_reward: shape mismatch");

  const double log_z = std::log(partition_z);
  Table r(d_ref.rows(), d_ref.cols(), 0.0);
  for (std::size_t s = 0; s < d_ref.rows(); ++s) {
    for (std::size_t a = 0; a < d_ref.cols(); ++a) {
      const double num = d_star(s, a);
      const double den = d_ref(s, a);
      if (den == 0.0 && num == 0.0) continue;
      if (den == 0.0 || num == 0.0) {
        throw SupportMismatchError("implied_reward: supports differ at (" +
                                   std::to_string(s) + "," + std::to_string(a) + ")");
      }
      r(s, a) = beta * std::log(num / den) + beta * log_z;
    }
  }
  return r;
}

double realizability_gap(const Mdp& mdp, const Saom& d) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  Table logits(ns, na, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    double row = 0.0;
    for (std::size_t a = 0; a < na; ++a) row += d.d(s, a);
    if (row == 0.0) continue;
    for (std::size_t a = 0; a < na; ++a) {
      // Unsupported actions get a large negative logit, not -inf.
      logits(s, a) = d.d(s, a) > 0.0 ? std::log(d.d(s, a) / row) : -700.0;
    }
  }
  const Saom induced = saom_exact(mdp, TabularPolicy(std::move(logits)), d.horizon, d.gamma);
  double gap = 0.0;
  for (std::size_t i = 0; i < induced.d.size(); ++i) {
    gap = std::max(gap, std::abs(induced.d.flat()[i] - d.d.flat()[i]));
  }
  return gap;
}

StateActionSet state_action_support(std::span<const Trajectory> trajs) {
  StateActionSet out;
  for (const Trajectory& traj : trajs) {
    for (const Step& step : traj.steps) out.emplace(step.state, step.action);
  }
  return out;
}

double compounding_error(const Trajectory& traj, const StateActionSet& expert_support) {
  if (expert_support.empty()) throw ValidationError("compounding_error: empty expert set");
  if (traj.length() == 0) return 0.0;
  std::size_t off = 0;
  for (const Step& step : traj.steps) {
    off += expert_support.count({step.state, step.action}) == 0 ? 1 : 0;
  }
  return static_cast<double>(off) / static_cast<double>(traj.length());
}

double compounding_error(const Trajectory& traj, std::span<const Trajectory> expert_trajs) {
  if (expert_trajs.empty()) throw ValidationError("compounding_error: empty expert set");
  return compounding_error(traj, state_action_support(expert_trajs));
}

}  // namespace dmpo
