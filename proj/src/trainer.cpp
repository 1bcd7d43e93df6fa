#include "dmpo/trainer.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "dmpo/error.hpp"
#include "dmpo/parallel.hpp"
#include "dmpo/rollout.hpp"

namespace dmpo {
namespace {

constexpr std::uint64_t kTagShuffle = 11;
constexpr std::uint64_t kEvalSalt = 0x5eed0e7a1ULL;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                          std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, epoch, kTagShuffle);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

LossReport loss_for(LossKind kind, std::span<const PreferencePair> batch,
                    const TabularPolicy& policy, const TabularPolicy& ref,
                    const TrainConfig& cfg) {
  return kind == LossKind::kDmpo ? dmpo_loss(batch, policy, ref, cfg)
                                 : dpo_traj_loss(batch, policy, ref, cfg);
}

Table grad_for(LossKind kind, std::span<const PreferencePair> batch,
               const TabularPolicy& policy, const TabularPolicy& ref,
               const TrainConfig& cfg) {
  return kind == LossKind::kDmpo ? dmpo_grad(batch, policy, ref, cfg)
                                 : dpo_traj_grad(batch, policy, ref, cfg);
}

MetricsRecord make_record(std::size_t epoch, const LossReport& loss, const Evaluation& eval) {
  return MetricsRecord{epoch,           loss.value,
                       eval.avg_reward, eval.avg_final_reward,
                       eval.compounding_error, loss.pair_weight};
}

}  // namespace

Evaluation evaluate(const Mdp& mdp, const TabularPolicy& policy, const TrainConfig& cfg,
                    const StateActionSet& expert_support) {
  const RolloutReport report = rollout(mdp, policy, cfg.eval_episodes, cfg.seed ^ kEvalSalt,
                                       !cfg.stochastic_eval, cfg.gamma);
  double off_support = 0.0;
  for (const Trajectory& traj : report.trajectories) {
    off_support += compounding_error(traj, expert_support);
  }
  return Evaluation{report.avg_return, report.avg_final_reward,
                    off_support / static_cast<double>(report.trajectories.size())};
}

TrainResult train_sft(const Mdp& mdp, const std::vector<Trajectory>& expert,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (expert.empty()) throw ValidationError("train_sft: empty expert set");
  for (const Trajectory& traj : expert) validate_trajectory(traj, mdp);

  const StateActionSet support = state_action_support(expert);
  TrainResult result{TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()), {}};
  result.metrics.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    result.policy.apply(sft_grad(expert, result.policy), -cfg.learning_rate);
    const LossReport loss = sft_loss(expert, result.policy);
    result.metrics.push_back(
        make_record(epoch, loss, evaluate(mdp, result.policy, cfg, support)));
  }
  return result;
}

TrainResult train_preference(const Mdp& mdp, const std::vector<PreferencePair>& dataset,
                             const TabularPolicy& ref, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.loss_kind == LossKind::kSft) {
    throw ConfigError("train_preference: loss_kind must be dmpo or dpo_traj");
  }
  if (!ref.frozen()) throw ConfigError("train_preference: reference policy must be frozen");
  if (dataset.empty()) throw ValidationError("train_preference: empty dataset");
  check_dimensions(ref, mdp);

  std::vector<Trajectory> wins;
  wins.reserve(dataset.size());
  for (const PreferencePair& pair : dataset) wins.push_back(pair.win);
  const StateActionSet support = state_action_support(wins);

  TrainResult result{ref.trainable_copy(), {}};
  result.metrics.reserve(cfg.epochs);
  std::vector<PreferencePair> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(dataset.size(), cfg.seed, epoch);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(dataset[order[k]]);
      result.policy.apply(grad_for(cfg.loss_kind, batch, result.policy, ref, cfg),
                          -cfg.learning_rate);
    }
    const LossReport loss = loss_for(cfg.loss_kind, dataset, result.policy, ref, cfg);
    result.metrics.push_back(
        make_record(epoch, loss, evaluate(mdp, result.policy, cfg, support)));
  }
  return result;
}

std::vector<SweepRow> gamma_sweep(const Mdp& mdp, const std::vector<SweepSeed>& seeds,
                                  const TrainConfig& cfg, const std::vector<double>& gammas) {
  if (gammas.empty()) throw ValidationError("gamma_sweep: no gamma values");
  for (double g : gammas) validate_gamma(g);

  struct Cell {
    std::size_t seed_index;
    Setting setting;
    double gamma;
  };
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    for (Setting setting : {Setting::kNoisy, Setting::kClean}) {
      for (double g : gammas) cells.push_back({k, setting, g});
    }
  }

  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    const SweepSeed& in = seeds[cell.seed_index];
    TrainConfig run = cfg;
    run.gamma = cell.gamma;
    run.seed = in.seed;
    run.loss_kind = LossKind::kDmpo;
    const auto& data = cell.setting == Setting::kNoisy ? in.noisy : in.clean;
    const TrainResult trained = train_preference(mdp, data, in.ref, run);
    const MetricsRecord& last = trained.metrics.empty()
                                    ? MetricsRecord{}
                                    : trained.metrics.back();
    rows[i] = SweepRow{to_string(cell.setting), cell.gamma, in.seed, last.avg_final_reward,
                       last.compounding_error};
  });
  return rows;
}

std::vector<SweepRow> length_sweep(const Mdp& mdp, const std::vector<LengthSweepSeed>& seeds,
                                   const TrainConfig& cfg) {
  struct Cell {
    std::size_t seed_index;
    LossKind kind;
    std::size_t bucket;
  };
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const auto& buckets = seeds[k].dataset.manifest.length_buckets;
    if (buckets.empty()) throw ValidationError("length_sweep: dataset has no buckets");
    for (LossKind kind : {LossKind::kDmpo, LossKind::kDpoTraj}) {
      for (std::size_t b = 0; b < buckets.size(); ++b) cells.push_back({k, kind, b});
    }
  }

  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    const LengthSweepSeed& in = seeds[cell.seed_index];
    const auto& manifest = in.dataset.manifest;
    const std::size_t per_bucket = manifest.length_buckets[cell.bucket].pairs;
    const auto first = in.dataset.pairs.begin() +
                       static_cast<std::ptrdiff_t>(cell.bucket * per_bucket);
    const std::vector<PreferencePair> data(first,
                                           first + static_cast<std::ptrdiff_t>(per_bucket));
    TrainConfig run = cfg;
    run.seed = in.seed;
    run.loss_kind = cell.kind;
    const TrainResult trained = train_preference(mdp, data, in.ref, run);
    const MetricsRecord& last = trained.metrics.empty()
                                    ? MetricsRecord{}
                                    : trained.metrics.back();
    rows[i] = SweepRow{to_string(cell.kind),
                       static_cast<double>(manifest.length_buckets[cell.bucket].max_length),
                       in.seed, last.avg_final_reward, last.compounding_error};
  });
  return rows;
}

std::vector<SweepCell> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepCell> cells;
  std::vector<std::size_t> counts;
  for (const SweepRow& row : rows) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const SweepCell& c) {
      return c.label == row.label && c.axis == row.axis;
    });
    if (it == cells.end()) {
      cells.push_back({row.label, row.axis, 0.0, 0.0});
      counts.push_back(0);
      it = cells.end() - 1;
    }
    const std::size_t k = static_cast<std::size_t>(it - cells.begin());
    it->mean_reward += row.avg_final_reward;
    it->mean_compounding_error += row.compounding_error;
    ++counts[k];
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].mean_reward /= static_cast<double>(counts[k]);
    cells[k].mean_compounding_error /= static_cast<double>(counts[k]);
  }
  return cells;
}

double best_axis(const std::vector<SweepCell>& cells, const std::string& label) {
  const SweepCell* best = nullptr;
  for (const SweepCell& c : cells) {
    if (c.label != label) continue;
    if (best == nullptr || c.mean_reward > best->mean_reward ||
        (c.mean_reward == best->mean_reward && c.axis < best->axis)) {
      best = &c;
    }
  }
  if (best == nullptr) throw ValidationError("best_axis: no cells labelled " + label);
  return best->axis;
}

}  // namespace dmpo
