#include "dmpo/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "dmpo/error.hpp"
#include "dmpo/rollout.hpp"

namespace dmpo {
namespace {

constexpr std::size_t kMaxAttemptsPerPair = 1000;
constexpr std::size_t kMinAttemptsForRate = 1000;
constexpr double kMinAcceptanceRate = 0.01;

// Stream tags separating the independent uses of one (seed, index) key.
constexpr std::uint64_t kTagLose = 1;

class AcceptanceMeter {
 public:
  void record(bool accepted) {
    ++attempts_;
    accepted_ += accepted ? 1 : 0;
    if (attempts_ >= kMinAttemptsForRate &&
        static_cast<double>(accepted_) < kMinAcceptanceRate * static_cast<double>(attempts_)) {
      throw GenerationExhaustedError(
          "acceptance rate " + std::to_string(accepted_) + "/" + std::to_string(attempts_) +
          " fell below 1%");
    }
  }

 private:
  std::size_t attempts_ = 0;
  std::size_t accepted_ = 0;
};

// Draws candidates from `make` until `accept` holds.
template <typename Make, typename Accept>
Trajectory sample_until(Make&& make, Accept&& accept, AcceptanceMeter& meter,
                        std::size_t pair_index) {
  for (std::size_t attempt = 0; attempt < kMaxAttemptsPerPair; ++attempt) {
    Trajectory candidate = make();
    const bool ok = accept(candidate);
    meter.record(ok);
    if (ok) return candidate;
  }
  throw GenerationExhaustedError("no acceptable lose trajectory for pair " +
                                 std::to_string(pair_index) + " after " +
                                 std::to_string(kMaxAttemptsPerPair) + " attempts");
}

}  // namespace

std::string to_string(Setting setting) {
  return setting == Setting::kNoisy ? "noisy" : "clean";
}

Setting parse_setting(const std::string& name) {
  if (name == "noisy") return Setting::kNoisy;
  if (name == "clean") return Setting::kClean;
  throw ConfigError("unknown setting '" + name + "'");
}

void NoiseSpec::validate() const {
  if (!(p_rep >= 0.0 && p_rep <= 1.0 && p_rand >= 0.0 && p_rand <= 1.0 &&
        p_rep + p_rand <= 1.0 + 1e-12)) {
    throw ValidationError("noise: need p_rep, p_rand in [0,1] with p_rep + p_rand <= 1");
  }
}

void DatasetManifest::validate() const {
  if (length_buckets.empty()) return;
  std::size_t total = 0;
  for (const LengthBucket& b : length_buckets) {
    if (b.pairs != length_buckets.front().pairs) {
      throw ValidationError("manifest: buckets hold unequal pair counts");
    }
    total += b.pairs;
  }
  if (total != pairs) throw ValidationError("manifest: bucket counts do not sum to pairs");
}

std::vector<std::size_t> optimal_actions(const Mdp& mdp) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  std::vector<double> value(ns, 0.0);
  Table q(ns, na, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const auto dist = mdp.next_state_dist(s, a);
        double future = 0.0;
        for (std::size_t s2 = 0; s2 < ns; ++s2) {
          if (!mdp.is_terminal(s2)) future += dist[s2] * value[s2];
        }
        q(s, a) = mdp.reward(s, a) + kExpertDiscount * future;
      }
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (mdp.is_terminal(s)) continue;
      const auto row = q.row(s);
      const double best = *std::max_element(row.begin(), row.end());
      delta = std::max(delta, std::abs(best - value[s]));
      value[s] = best;
    }
    if (delta < 1e-14) break;
  }

  std::vector<std::size_t> actions(ns, 0);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto row = q.row(s);
    const double best = *std::max_element(row.begin(), row.end());
    for (std::size_t a = 0; a < na; ++a) {
      if (row[a] >= best - 1e-12) {
        actions[s] = a;
        break;
      }
    }
  }
  return actions;
}

TabularPolicy expert_policy(const Mdp& mdp) {
  return TabularPolicy::deterministic(optimal_actions(mdp), mdp.n_actions()).frozen_copy();
}

std::vector<Trajectory> expert_trajectories(const Mdp& mdp, std::size_t n,
                                            std::uint64_t seed) {
  if (n == 0) throw ValidationError("expert_trajectories: n must be at least 1");
  const std::vector<std::size_t> plan = optimal_actions(mdp);
  const ActionChooser choose = [&plan](std::size_t s, std::size_t,
                                       std::optional<std::size_t>, Rng&) { return plan[s]; };
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t start = sample_initial_state(mdp, rng);
    out.push_back(sample_trajectory(mdp, start, mdp.max_horizon(), choose, rng));
  }
  return out;
}

std::vector<Trajectory> successful_expert_trajectories(const Mdp& mdp, std::size_t n,
                                                       std::uint64_t seed) {
  if (n == 0) throw ValidationError("successful_expert_trajectories: n must be at least 1");
  const std::vector<std::size_t> plan = optimal_actions(mdp);
  const ActionChooser choose = [&plan](std::size_t s, std::size_t,
                                       std::optional<std::size_t>, Rng&) { return plan[s]; };
  AcceptanceMeter meter;
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::uint64_t i = 0; out.size() < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t start = sample_initial_state(mdp, rng);
    Trajectory traj = sample_trajectory(mdp, start, mdp.max_horizon(), choose, rng);
    const bool ok = task_reward(traj, mdp) > 0.0;
    meter.record(ok);
    if (ok) out.push_back(std::move(traj));
  }
  return out;
}

Trajectory noisy_episode(const Mdp& mdp, const TabularPolicy& base_policy,
                         std::size_t start, std::size_t horizon, const NoiseSpec& noise,
                         Rng& rng) {
  const std::size_t na = mdp.n_actions();
  // Without noise no extra draw is made, so the episode is exactly a
  // base-policy rollout on the same stream.
  const bool noiseless = noise.p_rep == 0.0 && noise.p_rand == 0.0;
  const ActionChooser choose = [&](std::size_t s, std::size_t,
                                   std::optional<std::size_t> prev, Rng& r) {
    if (noiseless) return r.categorical(base_policy.probs(s));
    const double u = r.uniform();
    if (prev && u < noise.p_rep) return *prev;
    if (u >= noise.p_rep && u < noise.p_rep + noise.p_rand) {
      return static_cast<std::size_t>(r.below(na));
    }
    return r.categorical(base_policy.probs(s));
  };
  return sample_trajectory(mdp, start, horizon, choose, rng);
}

std::vector<Trajectory> noisy_lose_trajectories(const Mdp& mdp,
                                                const TabularPolicy& base_policy,
                                                std::size_t n, std::uint64_t seed,
                                                const NoiseSpec& noise) {
  if (n == 0) throw ValidationError("noisy_lose_trajectories: n must be at least 1");
  noise.validate();
  check_dimensions(base_policy, mdp);
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i, kTagLose);
    const std::size_t start = sample_initial_state(mdp, rng);
    out.push_back(noisy_episode(mdp, base_policy, start, mdp.max_horizon(), noise, rng));
  }
  return out;
}

bool has_repeated_actions(const Trajectory& traj, std::size_t run) {
  std::size_t streak = 0;
  for (std::size_t t = 0; t < traj.length(); ++t) {
    streak = (t > 0 && traj.steps[t].action == traj.steps[t - 1].action) ? streak + 1 : 1;
    if (streak >= run) return true;
  }
  return false;
}

std::vector<Trajectory> clean_lose_for(const Mdp& mdp, const TabularPolicy& base_policy,
                                       const std::vector<Trajectory>& wins,
                                       std::uint64_t seed, double return_gamma) {
  check_dimensions(base_policy, mdp);
  validate_gamma(return_gamma);
  const ActionChooser choose = policy_chooser(base_policy, false);
  AcceptanceMeter meter;
  std::vector<Trajectory> out;
  out.reserve(wins.size());
  for (std::size_t i = 0; i < wins.size(); ++i) {
    const double bar = discounted_return(wins[i], mdp, return_gamma);
    Rng rng = Rng::stream(seed, i, kTagLose);
    out.push_back(sample_until(
        [&] {
          return sample_trajectory(mdp, wins[i].initial_state(), mdp.max_horizon(), choose,
                                   rng);
        },
        [&](const Trajectory& t) {
          return !has_repeated_actions(t) && discounted_return(t, mdp, return_gamma) < bar;
        },
        meter, i));
  }
  return out;
}

std::vector<Trajectory> clean_lose_trajectories(const Mdp& mdp,
                                                const TabularPolicy& base_policy,
                                                std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("clean_lose_trajectories: n must be at least 1");
  return clean_lose_for(mdp, base_policy, expert_trajectories(mdp, n, seed), seed);
}

Dataset build_dataset(const Mdp& mdp, const std::vector<Trajectory>& wins,
                      const TabularPolicy& base_policy, const DatasetOptions& options) {
  const std::size_t n = options.n_pairs;
  if (n == 0) throw ValidationError("build_dataset: n_pairs must be at least 1");
  if (wins.size() < n) throw ValidationError("build_dataset: fewer wins than n_pairs");
  check_dimensions(base_policy, mdp);
  validate_gamma(options.return_gamma);
  options.noise.validate();
  for (const Trajectory& w : wins) validate_trajectory(w, mdp);

  const std::vector<std::size_t>& ceilings = options.buckets;
  if (!ceilings.empty()) {
    if (n % ceilings.size() != 0) {
      throw ValidationError("build_dataset: bucket count must divide n_pairs");
    }
    for (std::size_t b = 0; b < ceilings.size(); ++b) {
      if (ceilings[b] == 0 || (b > 0 && ceilings[b] <= ceilings[b - 1])) {
        throw ValidationError("build_dataset: bucket ceilings must increase");
      }
    }
  }

  Dataset out;
  out.manifest.setting = options.setting;
  out.manifest.pairs = n;
  out.manifest.seed = options.seed;
  out.manifest.env_name = options.env_name;
  const std::size_t per_bucket = ceilings.empty() ? n : n / ceilings.size();
  for (std::size_t ceiling : ceilings) out.manifest.length_buckets.push_back({ceiling, per_bucket});

  const ActionChooser base = policy_chooser(base_policy, false);
  AcceptanceMeter meter;
  out.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& win = wins[i];
    std::size_t min_len = 1;
    std::size_t cap = mdp.max_horizon();
    if (!ceilings.empty()) {
      const std::size_t b = i / per_bucket;
      min_len = b == 0 ? 1 : ceilings[b - 1] + 1;
      cap = ceilings[b];
    }
    const double bar = discounted_return(win, mdp, options.return_gamma);
    Rng rng = Rng::stream(options.seed, i, kTagLose);

    auto make = [&] {
      if (options.setting == Setting::kNoisy) {
        return noisy_episode(mdp, base_policy, win.initial_state(), cap, options.noise, rng);
      }
      return sample_trajectory(mdp, win.initial_state(), cap, base, rng);
    };
    auto accept = [&](const Trajectory& t) {
      if (t.length() < min_len) return false;
      if (options.setting == Setting::kNoisy) return true;
      return !has_repeated_actions(t) && discounted_return(t, mdp, options.return_gamma) < bar;
    };
    out.pairs.push_back({win, sample_until(make, accept, meter, i)});
  }
  out.manifest.validate();
  return out;
}

}  // namespace dmpo
