#include "dmpo/experiment.hpp"

#include "dmpo/error.hpp"
#include "dmpo/parallel.hpp"

namespace dmpo {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint64_t> sweep_seeds(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < config.sweep.seeds; ++k) seeds.push_back(config.train.seed + k);
  return seeds;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  reference.validate();
  dataset.noise.validate();
  validate_gamma(dataset.return_gamma);
  if (dataset.n_pairs == 0) throw ValidationError("dataset.n_pairs must be positive");
  if (!dataset.buckets.empty() && dataset.n_pairs % dataset.buckets.size() != 0) {
    throw ValidationError("dataset.buckets must divide dataset.n_pairs");
  }
  if (sweep.seeds == 0) throw ValidationError("sweep.seeds must be positive");
  for (double g : sweep.gammas) validate_gamma(g);
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
}

Json to_json(const ExperimentConfig& c) {
  return Json{{"env", to_json(c.env)},
              {"setting", to_string(c.setting)},
              {"train", to_json(c.train)},
              {"reference", to_json(c.reference)},
              {"dataset",
               {{"n_pairs", c.dataset.n_pairs},
                {"buckets", c.dataset.buckets},
                {"noise", to_json(c.dataset.noise)},
                {"return_gamma", c.dataset.return_gamma}}},
              {"sweep", {{"seeds", c.sweep.seeds}, {"gammas", c.sweep.gammas}}},
              {"output_dir", c.output_dir}};
}

ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"env", "setting", "train", "reference",
                                  "dataset", "sweep", "output_dir"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("env")) c.env = env_from_json(j.at("env"));
    if (j.contains("setting")) c.setting = parse_setting(j.at("setting").get<std::string>());
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("reference")) {
      c.reference = train_config_from_json(j.at("reference"), c.reference);
    }
    if (j.contains("dataset")) {
      const Json& d = j.at("dataset");
      c.dataset.n_pairs = d.value("n_pairs", c.dataset.n_pairs);
      if (d.contains("buckets") && !d.at("buckets").is_null()) {
        c.dataset.buckets = d.at("buckets").get<std::vector<std::size_t>>();
      }
      if (d.contains("noise")) c.dataset.noise = noise_from_json(d.at("noise"));
      c.dataset.return_gamma = d.value("return_gamma", c.dataset.return_gamma);
    }
    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      c.sweep.seeds = s.value("seeds", c.sweep.seeds);
      if (s.contains("gammas")) c.sweep.gammas = s.at("gammas").get<std::vector<double>>();
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  return experiment_from_json(read_json(path));
}

SeedContext prepare_seed(const Mdp& mdp, const ExperimentConfig& config, std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.experts = successful_expert_trajectories(mdp, config.dataset.n_pairs, seed);
  TrainConfig sft = config.reference;
  sft.seed = seed;
  sft.loss_kind = LossKind::kSft;
  TrainResult trained = train_sft(mdp, ctx.experts, sft);
  ctx.reference = trained.policy.frozen_copy();
  ctx.reference_metrics = std::move(trained.metrics);
  return ctx;
}

Dataset make_dataset(const Mdp& mdp, const ExperimentConfig& config, const SeedContext& ctx,
                     Setting setting) {
  DatasetOptions options;
  options.setting = setting;
  options.n_pairs = config.dataset.n_pairs;
  options.seed = ctx.seed;
  options.buckets = config.dataset.buckets;
  options.noise = config.dataset.noise;
  options.return_gamma = config.dataset.return_gamma;
  options.env_name = config.env.name;
  return build_dataset(mdp, ctx.experts, ctx.reference, options);
}

void cmd_gen(const ExperimentConfig& config) {
  config.validate();
  const Mdp mdp = make_env(config.env);
  const SeedContext ctx = prepare_seed(mdp, config, config.train.seed);
  const Dataset data = make_dataset(mdp, config, ctx, config.setting);
  const fs::path out = config.output_dir;
  write_text(out / "dataset.jsonl", dataset_to_jsonl(data.pairs));
  write_json(out / "manifest.json", to_json(data.manifest));
  write_json(out / "reference.json", to_json(ctx.reference));
  write_json(out / "config.json", to_json(config));
}

void cmd_train(const ExperimentConfig& config) {
  config.validate();
  const Mdp mdp = make_env(config.env);
  const fs::path out = config.output_dir;
  const SeedContext ctx = prepare_seed(mdp, config, config.train.seed);
  write_json(out / "reference.json", to_json(ctx.reference));
  write_text(out / "sft_metrics.csv", metrics_to_csv(ctx.reference_metrics));
  write_json(out / "config.json", to_json(config));
  if (config.train.loss_kind == LossKind::kSft) return;

  const Dataset data = make_dataset(mdp, config, ctx, config.setting);
  const TrainResult trained = train_preference(mdp, data.pairs, ctx.reference, config.train);
  write_json(out / "policy.json", to_json(trained.policy));
  write_text(out / "metrics.csv", metrics_to_csv(trained.metrics));
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "gamma") return SweepAxis::kGamma;
  if (name == "length") return SweepAxis::kLength;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, SweepAxis axis) {
  config.validate();
  const Mdp mdp = make_env(config.env);
  const std::vector<std::uint64_t> seeds = sweep_seeds(config);

  if (axis == SweepAxis::kGamma) {
    std::vector<SweepSeed> inputs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t k) {
      const SeedContext ctx = prepare_seed(mdp, config, seeds[k]);
      inputs[k] = SweepSeed{seeds[k], ctx.reference,
                            make_dataset(mdp, config, ctx, Setting::kNoisy).pairs,
                            make_dataset(mdp, config, ctx, Setting::kClean).pairs};
    });
    return gamma_sweep(mdp, inputs, config.train, config.sweep.gammas);
  }

  if (config.dataset.buckets.empty()) {
    throw ValidationError("length sweep needs dataset.buckets");
  }
  std::vector<LengthSweepSeed> inputs(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t k) {
    const SeedContext ctx = prepare_seed(mdp, config, seeds[k]);
    inputs[k] = LengthSweepSeed{seeds[k], ctx.reference,
                                make_dataset(mdp, config, ctx, Setting::kNoisy)};
  });
  return length_sweep(mdp, inputs, config.train);
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config, SweepAxis axis) {
  std::vector<SweepRow> rows = run_sweep(config, axis);
  const std::string name = axis == SweepAxis::kGamma ? "sweep_gamma.csv" : "sweep_length.csv";
  write_text(fs::path(config.output_dir) / name, sweep_to_csv(rows));
  write_json(fs::path(config.output_dir) / "config.json", to_json(config));
  return rows;
}

}  // namespace dmpo
