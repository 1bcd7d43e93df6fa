#include "dmpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmpo/error.hpp"

namespace dmpo {
namespace {

void check_index(const TabularPolicy& policy, std::size_t s, std::size_t a) {
  if (s >= policy.n_states() || a >= policy.n_actions()) {
    throw ValidationError("policy: index (" + std::to_string(s) + "," + std::to_string(a) +
                          ") out of range");
  }
}

// log sum_b exp(row[b]) with max-subtraction.
double log_normalizer(std::span<const double> row) {
  const double peak = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double v : row) total += std::exp(v - peak);
  return peak + std::log(total);
}

}  // namespace

TabularPolicy::TabularPolicy(Table logits, bool frozen)
    : logits_(std::move(logits)), frozen_(frozen) {
  if (logits_.rows() == 0 || logits_.cols() == 0) {
    throw ValidationError("policy: logits table is empty");
  }
  for (double v : logits_.flat()) {
    if (!std::isfinite(v)) throw ValidationError("policy: non-finite logit");
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy(Table(n_states, n_actions, 0.0));
}

TabularPolicy TabularPolicy::deterministic(const std::vector<std::size_t>& actions,
                                           std::size_t n_actions, double margin) {
  Table logits(actions.size(), n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw ValidationError("policy: action out of range");
    logits(s, actions[s]) = margin;
  }
  return TabularPolicy(std::move(logits));
}

std::vector<double> TabularPolicy::probs(std::size_t s) const {
  check_index(*this, s, 0);
  const auto row = logits_.row(s);
  const double peak = *std::max_element(row.begin(), row.end());
  std::vector<double> out(row.size());
  double total = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    out[a] = std::exp(row[a] - peak);
    total += out[a];
  }
  for (double& p : out) p /= total;
  return out;
}

double TabularPolicy::prob(std::size_t s, std::size_t a) const {
  return std::exp(log_prob(*this, s, a));
}

std::size_t TabularPolicy::greedy_action(std::size_t s) const {
  check_index(*this, s, 0);
  const auto row = logits_.row(s);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void TabularPolicy::apply(const Table& delta, double scale) {
  if (frozen_) throw UpdateRefusedError("policy: refusing to update a frozen policy");
  if (!delta.same_shape(logits_)) throw ConfigError("policy: update has wrong shape");
  logits_.axpy(scale, delta);
}

void check_dimensions(const TabularPolicy& policy, const Mdp& mdp) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ConfigError("policy shape " + std::to_string(policy.n_states()) + "x" +
                      std::to_string(policy.n_actions()) + " does not match mdp " +
                      std::to_string(mdp.n_states()) + "x" +
                      std::to_string(mdp.n_actions()));
  }
}

void check_dimensions(const TabularPolicy& policy, const TabularPolicy& ref) {
  if (!policy.logits().same_shape(ref.logits())) {
    throw ConfigError("policy and reference have different shapes");
  }
}

double log_prob(const TabularPolicy& policy, std::size_t s, std::size_t a) {
  check_index(policy, s, a);
  const auto row = policy.logits().row(s);
  return row[a] - log_normalizer(row);
}

std::vector<double> traj_log_ratio_terms(const TabularPolicy& policy,
                                         const TabularPolicy& ref,
                                         const Trajectory& traj) {
  check_dimensions(policy, ref);
  std::vector<double> terms;
  terms.reserve(traj.length());
  for (const Step& step : traj.steps) {
    terms.push_back(log_prob(policy, step.state, step.action) -
                    log_prob(ref, step.state, step.action));
  }
  return terms;
}

void RowGradient::add_to(Table& grad, double scale) const {
  auto row = grad.row(state);
  for (std::size_t b = 0; b < values.size(); ++b) row[b] += scale * values[b];
}

RowGradient grad_log_prob(const TabularPolicy& policy, std::size_t s, std::size_t a) {
  if (policy.frozen()) throw UpdateRefusedError("policy: gradient of a frozen policy");
  check_index(policy, s, a);
  RowGradient g{s, policy.probs(s)};
  for (double& v : g.values) v = -v;
  g.values[a] += 1.0;
  return g;
}

}  // namespace dmpo
