#include "dmpo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "dmpo/datagen.hpp"
#include "dmpo/error.hpp"
#include "dmpo/occupancy.hpp"
#include "dmpo/rollout.hpp"
#include "dmpo/trainer.hpp"

namespace dmpo {
namespace {

namespace mp = boost::multiprecision;

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::size_t int_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

std::vector<double> dirichlet_one(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double total = 0.0;
  for (double& x : v) {
    x = -std::log1p(-rng.uniform());
    total += x;
  }
  for (double& x : v) x /= total;
  return v;
}

// phi evaluated exactly: gamma = m / 2^k, so
// phi = m^t (2^{k(T-t)} - m^{T-t}) / (2^{kT} - m^T).
double exact_phi(std::size_t t, std::size_t length, double gamma) {
  int exp = 0;
  const double frac = std::frexp(gamma, &exp);
  const mp::cpp_int m = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  const unsigned k = static_cast<unsigned>(53 - exp);
  const auto T = static_cast<unsigned>(length);
  const auto tt = static_cast<unsigned>(t);
  const mp::cpp_int num = mp::pow(m, tt) * ((mp::cpp_int(1) << (k * (T - tt))) - mp::pow(m, T - tt));
  const mp::cpp_int den = (mp::cpp_int(1) << (k * T)) - mp::pow(m, T);
  return (mp::cpp_bin_float_100(num) / mp::cpp_bin_float_100(den)).convert_to<double>();
}

// Euclidean projection onto {x >= floor, sum x = 1}.
std::vector<double> project_simplex(std::vector<double> v, double floor) {
  const std::size_t n = v.size();
  const double budget = 1.0 - floor * static_cast<double>(n);
  for (double& x : v) x -= floor;
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - budget) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  for (double& x : v) x = std::max(x - theta, 0.0) + floor;
  return v;
}

// Projected gradient ascent with backtracking on E_d[r] - beta KL(d || ref).
std::vector<double> pga_optimum(const std::vector<double>& ref, const std::vector<double>& r,
                                double beta) {
  const std::size_t n = ref.size();
  auto objective = [&](const std::vector<double>& d) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += d[i] * r[i] - beta * d[i] * std::log(d[i] / ref[i]);
    return v;
  };
  std::vector<double> d(n, 1.0 / static_cast<double>(n));
  double step = 1.0;
  double f = objective(d);
  for (int iter = 0; iter < 200000; ++iter) {
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = r[i] - beta * (std::log(d[i] / ref[i]) + 1.0);
    std::vector<double> next;
    double f_next = 0.0;
    double moved = 0.0;
    while (true) {
      std::vector<double> trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = d[i] + step * grad[i];
      next = project_simplex(trial, 1e-14);
      f_next = objective(next);
      double linear = 0.0;
      moved = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = next[i] - d[i];
        linear += grad[i] * delta;
        moved += delta * delta;
      }
      if (f_next >= f + linear - moved / (2.0 * step) - 1e-15 || step < 1e-20) break;
      step *= 0.5;
    }
    d = next;
    f = f_next;
    step *= 2.0;
    if (std::sqrt(moved) < 1e-15) break;
  }
  return d;
}

CheckResult finish(std::string name, double measured, double tolerance, bool extra_ok,
                   std::string detail = {}) {
  return CheckResult{std::move(name), extra_ok && measured < tolerance, measured, tolerance,
                     std::move(detail)};
}

std::vector<double> flat_copy(const Table& t) {
  return {t.flat().begin(), t.flat().end()};
}

}  // namespace

Mdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon, Rng& rng,
               bool with_terminal) {
  std::vector<double> transition;
  transition.reserve(n_states * n_actions * n_states);
  Table reward(n_states, n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = dirichlet_one(n_states, rng);
      transition.insert(transition.end(), row.begin(), row.end());
      reward(s, a) = rng.uniform();
    }
  }
  std::vector<std::size_t> terminal;
  std::vector<double> initial;
  if (with_terminal && n_states > 1) {
    terminal.push_back(n_states - 1);
    initial = dirichlet_one(n_states - 1, rng);
    initial.push_back(0.0);
  } else {
    initial = dirichlet_one(n_states, rng);
  }
  // Renormalize each row exactly enough for the 1e-12 check.
  for (std::size_t i = 0; i < n_states * n_actions; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) total += transition[i * n_states + j];
    for (std::size_t j = 0; j < n_states; ++j) transition[i * n_states + j] /= total;
  }
  return Mdp(n_states, n_actions, std::move(transition), std::move(reward), std::move(initial),
             std::move(terminal), horizon);
}

TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng,
                            double scale) {
  Table logits(n_states, n_actions);
  for (double& v : logits.flat()) v = uniform_in(rng, -scale, scale);
  return TabularPolicy(std::move(logits));
}

Trajectory random_trajectory(const Mdp& mdp, std::size_t length, Rng& rng) {
  const ActionChooser uniform = [&mdp](std::size_t, std::size_t, std::optional<std::size_t>,
                                       Rng& r) {
    return static_cast<std::size_t>(r.below(mdp.n_actions()));
  };
  return sample_trajectory(mdp, sample_initial_state(mdp, rng), length, uniform, rng);
}

PreferencePair random_pair(const Mdp& mdp, std::size_t max_length, Rng& rng) {
  const ActionChooser uniform = [&mdp](std::size_t, std::size_t, std::optional<std::size_t>,
                                       Rng& r) {
    return static_cast<std::size_t>(r.below(mdp.n_actions()));
  };
  const std::size_t start = sample_initial_state(mdp, rng);
  PreferencePair pair;
  pair.win = sample_trajectory(mdp, start, int_in(rng, 1, max_length), uniform, rng);
  pair.lose = sample_trajectory(mdp, start, int_in(rng, 1, max_length), uniform, rng);
  return pair;
}

Table finite_difference_grad(const TabularPolicy& policy,
                             const std::function<double(const TabularPolicy&)>& f,
                             double step) {
  Table grad(policy.n_states(), policy.n_actions());
  for (std::size_t s = 0; s < policy.n_states(); ++s) {
    for (std::size_t a = 0; a < policy.n_actions(); ++a) {
      Table plus = policy.logits();
      Table minus = policy.logits();
      plus(s, a) += step;
      minus(s, a) -= step;
      grad(s, a) = (f(TabularPolicy(std::move(plus))) - f(TabularPolicy(std::move(minus)))) /
                   (2.0 * step);
    }
  }
  return grad;
}

double max_norm_rel_error(const Table& a, const Table& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a.flat()[i] - b.flat()[i]));
    scale = std::max(scale, std::abs(b.flat()[i]));
  }
  return diff / std::max(scale, 1e-300);
}

CheckResult check_phi_law(const VerifyOptions& options) {
  Rng rng(options.seed);
  double worst = 0.0;
  bool anchored = true;
  bool decreasing = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t length = int_in(rng, 1, 40);
    const std::size_t t = int_in(rng, 0, length - 1);
    double gamma = rng.uniform();
    if (gamma == 0.0) gamma = 0.5;
    const double exact = exact_phi(t, length, gamma);
    const double got = options.phi_impl(t, length, gamma);
    worst = std::max(worst, std::abs(got - exact) / exact);
    anchored = anchored && options.phi_impl(0, length, gamma) == 1.0;
    for (std::size_t k = 0; k + 1 < length; ++k) {
      decreasing = decreasing && options.phi_impl(k + 1, length, gamma) <
                                     options.phi_impl(k, length, gamma);
    }
  }
  std::ostringstream detail;
  detail << "phi(0,T)=1: " << (anchored ? "yes" : "no")
         << ", strictly decreasing: " << (decreasing ? "yes" : "no");
  return finish("phi law vs exact fractions", worst, 1e-12, anchored && decreasing,
                detail.str());
}

CheckResult check_first_step_degeneracy(const VerifyOptions& options) {
  Rng rng(options.seed + 1);
  const double gamma = 1e-8;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Mdp mdp = random_mdp(int_in(rng, 2, 6), int_in(rng, 2, 4), 6, rng);
    const TabularPolicy ref = random_policy(mdp.n_states(), mdp.n_actions(), rng).frozen_copy();
    const TabularPolicy policy = random_policy(mdp.n_states(), mdp.n_actions(), rng);
    std::vector<PreferencePair> batch;
    for (std::size_t k = int_in(rng, 1, 8); k > 0; --k) batch.push_back(random_pair(mdp, 6, rng));
    const double beta = uniform_in(rng, 0.1, 1.0);
    const StepWeight weight = [&](std::size_t t, std::size_t len) {
      return options.phi_impl(t, len, gamma);
    };
    const double multi = preference_loss(batch, policy, ref, beta, weight).value;
    const double single = dpo_first_step_loss(batch, policy, ref, beta).value;
    worst = std::max(worst, std::abs(multi - single));
  }

  // End to end: gamma = 0 training against a run on first steps only.
  const Mdp chain = envs::chain({.n = 6, .slip = 0.1, .actions = 3, .start = 1, .horizon = 8});
  const TabularPolicy ref = random_policy(chain.n_states(), chain.n_actions(), rng).frozen_copy();
  std::vector<PreferencePair> data;
  std::vector<PreferencePair> first_steps;
  for (int k = 0; k < 16; ++k) {
    PreferencePair pair = random_pair(chain, 8, rng);
    first_steps.push_back({Trajectory{{pair.win.steps.front()}},
                           Trajectory{{pair.lose.steps.front()}}});
    data.push_back(std::move(pair));
  }
  TrainConfig cfg;
  cfg.gamma = 0.0;
  cfg.epochs = 100;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.5;
  cfg.eval_episodes = 1;
  cfg.loss_kind = LossKind::kDmpo;
  const TrainResult multi = train_preference(chain, data, ref, cfg);
  cfg.loss_kind = LossKind::kDpoTraj;
  const TrainResult single = train_preference(chain, first_steps, ref, cfg);
  double logit_gap = 0.0;
  for (std::size_t i = 0; i < ref.logits().size(); ++i) {
    logit_gap = std::max(logit_gap, std::abs(multi.policy.logits().flat()[i] -
                                             single.policy.logits().flat()[i]));
  }
  std::ostringstream detail;
  detail << "end-to-end logit gap after 100 epochs at gamma=0: " << logit_gap;
  return finish("gamma->0 reduces to first-step DPO", worst, 1e-6, logit_gap < 1e-6,
                detail.str());
}

CheckResult check_gradient(const VerifyOptions& options) {
  Rng rng(options.seed + 2);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Mdp mdp = random_mdp(int_in(rng, 1, 6), int_in(rng, 2, 4), 5, rng, i % 2 == 1);
    const TabularPolicy ref = random_policy(mdp.n_states(), mdp.n_actions(), rng).frozen_copy();
    const TabularPolicy policy = random_policy(mdp.n_states(), mdp.n_actions(), rng);
    std::vector<PreferencePair> batch;
    for (std::size_t k = int_in(rng, 1, 4); k > 0; --k) {
      // Identical members give an exactly-zero gradient; relative error is
      // meaningless there.
      PreferencePair pair = random_pair(mdp, 5, rng);
      while (pair.win == pair.lose) pair = random_pair(mdp, 5, rng);
      batch.push_back(std::move(pair));
    }
    TrainConfig cfg;
    cfg.beta = uniform_in(rng, 0.1, 1.0);
    cfg.gamma = uniform_in(rng, 0.0, 0.99);
    const Table analytic = dmpo_grad(batch, policy, ref, cfg);
    const Table numeric = finite_difference_grad(
        policy, [&](const TabularPolicy& p) { return dmpo_loss(batch, p, ref, cfg).value; });
    worst = std::max(worst, max_norm_rel_error(analytic, numeric));
  }
  return finish("dmpo gradient vs central differences", worst, 1e-6, true,
                "max-norm relative error over 100 instances");
}

CheckResult check_saom_normalization(const VerifyOptions& options) {
  Rng rng(options.seed + 3);
  double worst = 0.0;
  bool nonnegative = true;
  for (int i = 0; i < 100; ++i) {
    const std::size_t horizon = int_in(rng, 1, 10);
    const Mdp mdp = random_mdp(int_in(rng, 2, 6), int_in(rng, 1, 4), horizon, rng, i % 2 == 0);
    const TabularPolicy policy = random_policy(mdp.n_states(), mdp.n_actions(), rng);
    const double gamma = i % 10 == 0 ? 0.0 : uniform_in(rng, 0.0, 0.99);
    const Saom d = saom_exact(mdp, policy, horizon, gamma);
    worst = std::max(worst, std::abs(d.d.sum() - 1.0));
    for (double v : d.d.flat()) nonnegative = nonnegative && v >= 0.0;
  }
  return finish("occupancy measure sums to one", worst, 1e-10, nonnegative);
}

CheckResult check_saom_monte_carlo(const VerifyOptions& options) {
  Rng rng(options.seed + 4);
  double worst = 0.0;
  auto compare = [&](const Mdp& mdp, const TabularPolicy& policy, std::size_t horizon,
                     double gamma) {
    const Saom exact = saom_exact(mdp, policy, horizon, gamma);
    const Saom mc = saom_monte_carlo(mdp, policy, horizon, gamma, 100000, options.seed);
    for (std::size_t k = 0; k < exact.d.size(); ++k) {
      worst = std::max(worst, std::abs(exact.d.flat()[k] - mc.d.flat()[k]));
    }
  };
  const Mdp chain = envs::chain({.n = 5, .slip = 0.1});
  compare(chain, TabularPolicy::uniform(chain.n_states(), chain.n_actions()), 8, 0.9);
  for (int i = 0; i < 3; ++i) {
    const Mdp mdp = random_mdp(4, 3, 6, rng, i == 0);
    compare(mdp, random_policy(4, 3, rng), 6, 0.8);
  }
  return finish("Monte Carlo occupancy (n=1e5) matches exact DP", worst, 0.01, true);
}

CheckResult check_closed_form(const VerifyOptions& options) {
  Rng rng(options.seed + 5);
  double worst_gap = 0.0;
  double worst_violation = -1.0;
  for (int i = 0; i < 20; ++i) {
    const Mdp mdp = random_mdp(4, 3, 5, rng);
    const Saom ref = saom_exact(mdp, random_policy(4, 3, rng), 5, 0.9);
    const double beta = uniform_in(rng, 0.2, 2.0);
    const SaomSolution sol = optimal_saom(mdp, ref, beta);

    const std::vector<double> oracle =
        pga_optimum(flat_copy(ref.d), flat_copy(mdp.reward_table()), beta);
    Table oracle_table(4, 3);
    std::copy(oracle.begin(), oracle.end(), oracle_table.flat().begin());
    const double oracle_value = saom_objective(oracle_table, ref.d, mdp.reward_table(), beta);
    worst_gap = std::max(worst_gap, std::abs(oracle_value - sol.objective_value));
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      worst_gap = std::max(worst_gap, std::abs(oracle[k] - sol.d_star.d.flat()[k]));
    }

    Table point(4, 3);
    for (int p = 0; p < 100000; ++p) {
      const auto x = dirichlet_one(12, rng);
      std::copy(x.begin(), x.end(), point.flat().begin());
      worst_violation = std::max(
          worst_violation,
          saom_objective(point, ref.d, mdp.reward_table(), beta) - sol.objective_value);
    }
  }
  std::ostringstream detail;
  detail << "best random simplex point minus closed form: " << worst_violation;
  return finish("closed-form occupancy optimum (PGA oracle, 1e5 simplex points)", worst_gap,
                1e-6, worst_violation <= 0.0, detail.str());
}

CheckResult check_reward_round_trip(const VerifyOptions& options) {
  Rng rng(options.seed + 6);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Mdp mdp = random_mdp(int_in(rng, 2, 5), int_in(rng, 2, 3), 6, rng, i % 2 == 0);
    const Saom ref = saom_exact(mdp, random_policy(mdp.n_states(), mdp.n_actions(), rng), 6,
                                uniform_in(rng, 0.0, 0.99));
    const double beta = uniform_in(rng, 0.1, 2.0);
    const SaomSolution sol = optimal_saom(mdp, ref, beta);
    const Table r = implied_reward(sol.d_star.d, ref.d, beta, sol.partition_z);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        if (ref.d(s, a) > 0.0) worst = std::max(worst, std::abs(r(s, a) - mdp.reward(s, a)));
      }
    }
  }
  return finish("reward recovered from occupancy ratio with one scalar Z", worst, 1e-10, true);
}

CheckResult check_bradley_terry(const VerifyOptions& options) {
  Rng rng(options.seed + 7);
  double worst = 0.0;
  bool biased = true;
  for (int i = 0; i < 200; ++i) {
    const double x = uniform_in(rng, -50.0, 50.0);
    worst = std::max(worst, std::abs(sigmoid(x) + sigmoid(-x) - 1.0));
    worst = std::max(worst, std::abs(bt_prob_single(x, x) - 0.5));
  }
  worst = std::max(worst, std::abs(bt_prob_single(100.0, 0.0) - 1.0));

  // Equal per-step reward, lose three times longer.
  Table reward(1, 1, 0.0);
  for (int i = 0; i < 50; ++i) {
    reward(0, 0) = uniform_in(rng, 0.05, 1.0);
    const std::size_t tw = int_in(rng, 1, 4);
    const Mdp loop(1, 1, {1.0}, reward, {1.0}, {}, 3 * tw);
    const PreferencePair pair{Trajectory{std::vector<Step>(tw, Step{0, 0})},
                              Trajectory{std::vector<Step>(3 * tw, Step{0, 0})}};
    const double gamma = uniform_in(rng, 0.05, 0.95);
    worst = std::max(worst, std::abs(bt_logit_traj(pair, loop, gamma, true)));
    biased = biased && std::abs(bt_logit_traj(pair, loop, gamma, false)) > 1e-6;
    const PreferencePair same{pair.lose, pair.lose};
    worst = std::max(worst, std::abs(bt_prob_traj(same, loop, gamma, false) - 0.5));
    worst = std::max(worst, std::abs(bt_prob_traj(same, loop, gamma, true) - 0.5));
  }
  return finish("Bradley-Terry symmetry, saturation and length bias", worst, 1e-12, biased,
                biased ? "unnormalized logit biased by length" : "no length bias observed");
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  return {check_phi_law(options),           check_first_step_degeneracy(options),
          check_gradient(options),          check_saom_normalization(options),
          check_saom_monte_carlo(options),  check_closed_form(options),
          check_reward_round_trip(options), check_bradley_terry(options)};
}

}  // namespace dmpo
