#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmpo/mdp.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/table.hpp"

namespace dmpo {

/// A (win, lose) trajectory pair sharing its initial state.
struct PreferencePair {
  Trajectory win;
  Trajectory lose;
  bool operator==(const PreferencePair&) const = default;
};

enum class LossKind { kDmpo, kDpoTraj, kSft };

std::string to_string(LossKind kind);
/// Throws ConfigError on unknown names.
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
  double beta = 0.1;
  double gamma = 0.9;
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kDmpo;
  // Evaluation rollouts per epoch, argmax unless stochastic_eval.
  std::size_t eval_episodes = 200;
  bool stochastic_eval = false;

  /// Throws ValidationError on beta <= 0, gamma outside [0,1),
  /// learning_rate <= 0 or a zero batch size / eval count.
  void validate() const;
};

struct LossReport {
  double value = 0.0;
  double win_score = 0.0;
  double lose_score = 0.0;
  double pair_weight = 0.0;
};

/// Per-step weight w(t, T) applied to the log-ratio of step t of a length-T
/// trajectory.
using StepWeight = std::function<double(std::size_t t, std::size_t length)>;

/// gamma^t (1 - gamma^(T-t)) / (1 - gamma^T); the gamma = 0 limit is 1{t = 0}.
/// Throws ValidationError when t >= T or gamma is outside [0, 1).
double phi(std::size_t t, std::size_t length, double gamma);

/// Weighted score sum_t beta w(t,T) log(pi(a_t|s_t) / pi_ref(a_t|s_t)).
double weighted_traj_score(const TabularPolicy& policy, const TabularPolicy& ref,
                           const Trajectory& traj, double beta, const StepWeight& weight);

/// Phi(tau) with w = phi(., ., gamma).
double traj_score(const TabularPolicy& policy, const TabularPolicy& ref,
                  const Trajectory& traj, double beta, double gamma);

double sigmoid(double x);
/// -log sigmoid(x) evaluated as softplus(-x).
double neg_log_sigmoid(double x);

/// exp(r_win) / (exp(r_win) + exp(r_lose)).
double bt_prob_single(double r_win, double r_lose);

/// Logit of the trajectory-level Bradley-Terry model: difference of
/// discounted returns, each optionally premultiplied by (1-g)/(1-g^T) for its
/// own length.
double bt_logit_traj(const PreferencePair& pair, const Mdp& mdp, double gamma,
                     bool normalized);
double bt_prob_traj(const PreferencePair& pair, const Mdp& mdp, double gamma,
                    bool normalized);

/// Mean of -log sigmoid(score(win) - score(lose)) for an arbitrary step
/// weighting, plus diagnostics. The DMPO and trajectory-DPO losses are the
/// phi and constant-one weightings.
LossReport preference_loss(std::span<const PreferencePair> batch,
                           const TabularPolicy& policy, const TabularPolicy& ref,
                           double beta, const StepWeight& weight);
Table preference_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                      const TabularPolicy& ref, double beta, const StepWeight& weight);

LossReport dmpo_loss(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                     const TabularPolicy& ref, const TrainConfig& cfg);
Table dmpo_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                const TabularPolicy& ref, const TrainConfig& cfg);

/// Baseline: beta times the unweighted sum of per-step log-ratios.
LossReport dpo_traj_loss(std::span<const PreferencePair> batch,
                         const TabularPolicy& policy, const TabularPolicy& ref,
                         const TrainConfig& cfg);
Table dpo_traj_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                    const TabularPolicy& ref, const TrainConfig& cfg);

/// Single-turn DPO applied to the first step of each trajectory only.
LossReport dpo_first_step_loss(std::span<const PreferencePair> batch,
                               const TabularPolicy& policy, const TabularPolicy& ref,
                               double beta);

/// Mean negative log-likelihood over every (s_t, a_t) in the batch.
LossReport sft_loss(std::span<const Trajectory> batch, const TabularPolicy& policy);
Table sft_grad(std::span<const Trajectory> batch, const TabularPolicy& policy);

}  // namespace dmpo
