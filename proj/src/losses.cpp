#include "dmpo/losses.hpp"

#include <cmath>

#include "dmpo/error.hpp"
#include "dmpo/occupancy.hpp"

namespace dmpo {
namespace {

void require_batch(std::size_t n, const char* what) {
  if (n == 0) throw ValidationError(std::string(what) + ": empty batch");
}

StepWeight phi_weight(double gamma) {
  validate_gamma(gamma);
  return [gamma](std::size_t t, std::size_t length) { return phi(t, length, gamma); };
}

StepWeight unit_weight() {
  return [](std::size_t, std::size_t) { return 1.0; };
}

void accumulate_score_grad(const TabularPolicy& policy, const Trajectory& traj,
                           double scale, const StepWeight& weight, Table& grad) {
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const double w = weight(t, traj.length());
    if (w == 0.0) continue;
    const Step& step = traj.steps[t];
    grad_log_prob(policy, step.state, step.action).add_to(grad, scale * w);
  }
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kDmpo: return "dmpo";
    case LossKind::kDpoTraj: return "dpo_traj";
    case LossKind::kSft: return "sft";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "dmpo") return LossKind::kDmpo;
  if (name == "dpo_traj") return LossKind::kDpoTraj;
  if (name == "sft") return LossKind::kSft;
  throw ConfigError("unknown loss_kind '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(beta > 0.0)) throw ValidationError("train: beta must be positive");
  validate_gamma(gamma);
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
  if (batch_size == 0) throw ValidationError("train: batch_size must be positive");
  if (eval_episodes == 0) throw ValidationError("train: eval_episodes must be positive");
}

double phi(std::size_t t, std::size_t length, double gamma) {
  validate_gamma(gamma);
  if (t >= length) {
    throw ValidationError("phi: step " + std::to_string(t) + " outside length " +
                          std::to_string(length));
  }
  if (gamma == 0.0) return t == 0 ? 1.0 : 0.0;
  if (t == 0) return 1.0;
  const double log_g = std::log(gamma);
  const double remaining = static_cast<double>(length - t);
  return std::exp(static_cast<double>(t) * log_g) * std::expm1(remaining * log_g) /
         std::expm1(static_cast<double>(length) * log_g);
}

double weighted_traj_score(const TabularPolicy& policy, const TabularPolicy& ref,
                           const Trajectory& traj, double beta, const StepWeight& weight) {
  const std::vector<double> terms = traj_log_ratio_terms(policy, ref, traj);
  double score = 0.0;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    score += beta * weight(t, terms.size()) * terms[t];
  }
  return score;
}

double traj_score(const TabularPolicy& policy, const TabularPolicy& ref,
                  const Trajectory& traj, double beta, double gamma) {
  return weighted_traj_score(policy, ref, traj, beta, phi_weight(gamma));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double x) {
  // softplus(-x) = max(-x, 0) + log1p(exp(-|x|))
  return std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double bt_prob_single(double r_win, double r_lose) { return sigmoid(r_win - r_lose); }

double bt_logit_traj(const PreferencePair& pair, const Mdp& mdp, double gamma,
                     bool normalized) {
  double win = discounted_return(pair.win, mdp, gamma);
  double lose = discounted_return(pair.lose, mdp, gamma);
  if (normalized) {
    win *= length_normalizer(pair.win.length(), gamma);
    lose *= length_normalizer(pair.lose.length(), gamma);
  }
  return win - lose;
}

double bt_prob_traj(const PreferencePair& pair, const Mdp& mdp, double gamma,
                    bool normalized) {
  return sigmoid(bt_logit_traj(pair, mdp, gamma, normalized));
}

LossReport preference_loss(std::span<const PreferencePair> batch,
                           const TabularPolicy& policy, const TabularPolicy& ref,
                           double beta, const StepWeight& weight) {
  require_batch(batch.size(), "preference_loss");
  LossReport report;
  for (const PreferencePair& pair : batch) {
    const double win = weighted_traj_score(policy, ref, pair.win, beta, weight);
    const double lose = weighted_traj_score(policy, ref, pair.lose, beta, weight);
    report.value += neg_log_sigmoid(win - lose);
    report.win_score += win;
    report.lose_score += lose;
    report.pair_weight += sigmoid(lose - win);
  }
  const double n = static_cast<double>(batch.size());
  report.value /= n;
  report.win_score /= n;
  report.lose_score /= n;
  report.pair_weight /= n;
  return report;
}

Table preference_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                      const TabularPolicy& ref, double beta, const StepWeight& weight) {
  require_batch(batch.size(), "preference_grad");
  if (policy.frozen()) throw UpdateRefusedError("preference_grad: policy is frozen");
  check_dimensions(policy, ref);
  Table grad(policy.n_states(), policy.n_actions(), 0.0);
  const double n = static_cast<double>(batch.size());
  for (const PreferencePair& pair : batch) {
    const double win = weighted_traj_score(policy, ref, pair.win, beta, weight);
    const double lose = weighted_traj_score(policy, ref, pair.lose, beta, weight);
    // d/dtheta -log sigmoid(x) = -sigmoid(-x) dx/dtheta
    const double pair_weight = sigmoid(lose - win);
    accumulate_score_grad(policy, pair.win, -pair_weight * beta / n, weight, grad);
    accumulate_score_grad(policy, pair.lose, pair_weight * beta / n, weight, grad);
  }
  return grad;
}

LossReport dmpo_loss(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                     const TabularPolicy& ref, const TrainConfig& cfg) {
  cfg.validate();
  return preference_loss(batch, policy, ref, cfg.beta, phi_weight(cfg.gamma));
}

Table dmpo_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                const TabularPolicy& ref, const TrainConfig& cfg) {
  cfg.validate();
  return preference_grad(batch, policy, ref, cfg.beta, phi_weight(cfg.gamma));
}

LossReport dpo_traj_loss(std::span<const PreferencePair> batch,
                         const TabularPolicy& policy, const TabularPolicy& ref,
                         const TrainConfig& cfg) {
  cfg.validate();
  return preference_loss(batch, policy, ref, cfg.beta, unit_weight());
}

Table dpo_traj_grad(std::span<const PreferencePair> batch, const TabularPolicy& policy,
                    const TabularPolicy& ref, const TrainConfig& cfg) {
  cfg.validate();
  return preference_grad(batch, policy, ref, cfg.beta, unit_weight());
}

LossReport dpo_first_step_loss(std::span<const PreferencePair> batch,
                               const TabularPolicy& policy, const TabularPolicy& ref,
                               double beta) {
  return preference_loss(batch, policy, ref, beta,
                         [](std::size_t t, std::size_t) { return t == 0 ? 1.0 : 0.0; });
}

LossReport sft_loss(std::span<const Trajectory> batch, const TabularPolicy& policy) {
  require_batch(batch.size(), "sft_loss");
  double total = 0.0;
  std::size_t count = 0;
  for (const Trajectory& traj : batch) {
    for (const Step& step : traj.steps) {
      total -= log_prob(policy, step.state, step.action);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("sft_loss: batch has no steps");
  const double nll = total / static_cast<double>(count);
  return LossReport{nll, nll, nll, 0.5};
}

Table sft_grad(std::span<const Trajectory> batch, const TabularPolicy& policy) {
  require_batch(batch.size(), "sft_grad");
  if (policy.frozen()) throw UpdateRefusedError("sft_grad: policy is frozen");
  std::size_t count = 0;
  for (const Trajectory& traj : batch) count += traj.length();
  if (count == 0) throw ValidationError("sft_grad: batch has no steps");
  Table grad(policy.n_states(), policy.n_actions(), 0.0);
  const double scale = -1.0 / static_cast<double>(count);
  for (const Trajectory& traj : batch) {
    for (const Step& step : traj.steps) {
      grad_log_prob(policy, step.state, step.action).add_to(grad, scale);
    }
  }
  return grad;
}

}  // namespace dmpo
