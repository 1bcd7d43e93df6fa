#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmpo/datagen.hpp"
#include "dmpo/io.hpp"
#include "dmpo/losses.hpp"
#include "dmpo/mdp.hpp"
#include "dmpo/trainer.hpp"

namespace dmpo {

struct DatasetConfig {
  std::size_t n_pairs = 200;
  std::vector<std::size_t> buckets;
  NoiseSpec noise;
  double return_gamma = 0.9;
};

struct SweepConfig {
  std::size_t seeds = 5;
  std::vector<double> gammas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
};

/// One experiment, loaded from and saved to a JSON document whose keys match
/// the field names.
struct ExperimentConfig {
  EnvSpec env{"chain", {{"n", 10}, {"slip", 0.1}, {"start", 4}, {"horizon", 8}}};
  Setting setting = Setting::kClean;
  TrainConfig train;
  /// Optimizer settings for the SFT run that produces the reference policy.
  TrainConfig reference{0.1, 0.9, 5.0, 300, 32, 0, LossKind::kSft, 200, false};
  DatasetConfig dataset;
  SweepConfig sweep;
  std::string output_dir = "out";

  void validate() const;
};

Json to_json(const ExperimentConfig& config);
/// Missing keys take defaults; unknown top-level keys raise ConfigError.
ExperimentConfig experiment_from_json(const Json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Everything derived from one seed: experts, the frozen SFT reference and
/// its training history.
struct SeedContext {
  std::uint64_t seed = 0;
  std::vector<Trajectory> experts;
  TabularPolicy reference;
  std::vector<MetricsRecord> reference_metrics;
};

SeedContext prepare_seed(const Mdp& mdp, const ExperimentConfig& config, std::uint64_t seed);

Dataset make_dataset(const Mdp& mdp, const ExperimentConfig& config, const SeedContext& ctx,
                     Setting setting);

/// Writes dataset.jsonl, manifest.json and reference.json under output_dir.
void cmd_gen(const ExperimentConfig& config);

/// loss_kind = sft writes reference.json (frozen) and sft_metrics.csv;
/// otherwise also trains on a freshly built dataset and writes policy.json
/// and metrics.csv.
void cmd_train(const ExperimentConfig& config);

enum class SweepAxis { kGamma, kLength };
SweepAxis parse_sweep_axis(const std::string& name);

/// Builds per-seed inputs (seeds train.seed .. train.seed + sweep.seeds - 1),
/// runs the sweep and returns its rows.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, SweepAxis axis);

/// run_sweep, then writes sweep_<axis>.csv under output_dir.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config, SweepAxis axis);

}  // namespace dmpo
