#include "dmpo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dmpo/error.hpp"

namespace dmpo {
namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

}  // namespace

Json to_json(const Table& table) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto row = table.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Table table_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ConfigError("expected a non-empty nested array");
  }
  Table t(j.size(), j.front().size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != t.cols()) throw ConfigError("ragged nested array");
    for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = j[r][c].get<double>();
  }
  return t;
}

Json to_json(const Mdp& mdp) {
  Json transition = Json::array();
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto dist = mdp.next_state_dist(s, a);
      per_action.push_back(std::vector<double>(dist.begin(), dist.end()));
    }
    transition.push_back(std::move(per_action));
  }
  const auto init = mdp.initial_dist();
  return Json{{"n_states", mdp.n_states()},
              {"n_actions", mdp.n_actions()},
              {"transition", std::move(transition)},
              {"reward", to_json(mdp.reward_table())},
              {"initial_dist", std::vector<double>(init.begin(), init.end())},
              {"terminal_states", mdp.terminal_states()},
              {"max_horizon", mdp.max_horizon()}};
}

Mdp mdp_from_json(const Json& j) {
  const auto ns = get<std::size_t>(j, "n_states");
  const auto na = get<std::size_t>(j, "n_actions");
  const Json& tr = j.at("transition");
  if (tr.size() != ns) throw ConfigError("transition: wrong number of states");
  std::vector<double> flat;
  flat.reserve(ns * na * ns);
  for (const Json& per_action : tr) {
    if (per_action.size() != na) throw ConfigError("transition: wrong number of actions");
    for (const Json& dist : per_action) {
      if (dist.size() != ns) throw ConfigError("transition: wrong distribution length");
      for (const Json& p : dist) flat.push_back(p.get<double>());
    }
  }
  return Mdp(ns, na, std::move(flat), table_from_json(j.at("reward")),
             get<std::vector<double>>(j, "initial_dist"),
             get<std::vector<std::size_t>>(j, "terminal_states"),
             get<std::size_t>(j, "max_horizon"));
}

Json to_json(const TabularPolicy& policy) {
  return Json{{"logits", to_json(policy.logits())}, {"frozen", policy.frozen()}};
}

TabularPolicy policy_from_json(const Json& j) {
  return TabularPolicy(table_from_json(j.at("logits")), get_or<bool>(j, "frozen", false));
}

Json to_json(const Saom& saom) {
  return Json{{"d", to_json(saom.d)}, {"horizon", saom.horizon}, {"gamma", saom.gamma}};
}

Json to_json(const SaomSolution& solution) {
  return Json{{"d_star", to_json(solution.d_star)},
              {"partition_z", solution.partition_z},
              {"objective_value", solution.objective_value}};
}

Json to_json(const Trajectory& traj) {
  std::vector<std::size_t> states;
  std::vector<std::size_t> actions;
  for (const Step& step : traj.steps) {
    states.push_back(step.state);
    actions.push_back(step.action);
  }
  return Json{{"states", states}, {"actions", actions}};
}

Trajectory trajectory_from_json(const Json& j) {
  const auto states = get<std::vector<std::size_t>>(j, "states");
  const auto actions = get<std::vector<std::size_t>>(j, "actions");
  if (states.size() != actions.size()) throw ConfigError("trajectory: ragged arrays");
  Trajectory traj;
  for (std::size_t t = 0; t < states.size(); ++t) traj.steps.push_back({states[t], actions[t]});
  return traj;
}

Json to_json(const PreferencePair& pair) {
  return Json{{"win", to_json(pair.win)}, {"lose", to_json(pair.lose)}};
}

PreferencePair pair_from_json(const Json& j) {
  return {trajectory_from_json(j.at("win")), trajectory_from_json(j.at("lose"))};
}

Json to_json(const DatasetManifest& manifest) {
  Json buckets = nullptr;
  if (!manifest.length_buckets.empty()) {
    buckets = Json::array();
    for (const LengthBucket& b : manifest.length_buckets) {
      buckets.push_back(Json{{"max_length", b.max_length}, {"pairs", b.pairs}});
    }
  }
  return Json{{"setting", to_string(manifest.setting)},
              {"pairs", manifest.pairs},
              {"length_buckets", std::move(buckets)},
              {"seed", manifest.seed},
              {"env_name", manifest.env_name}};
}

DatasetManifest manifest_from_json(const Json& j) {
  DatasetManifest m;
  m.setting = parse_setting(get<std::string>(j, "setting"));
  m.pairs = get<std::size_t>(j, "pairs");
  if (j.contains("length_buckets") && !j.at("length_buckets").is_null()) {
    for (const Json& b : j.at("length_buckets")) {
      m.length_buckets.push_back(
          {get<std::size_t>(b, "max_length"), get<std::size_t>(b, "pairs")});
    }
  }
  m.seed = get<std::uint64_t>(j, "seed");
  m.env_name = get_or<std::string>(j, "env_name", "");
  m.validate();
  return m;
}

Json to_json(const TrainConfig& cfg) {
  return Json{{"beta", cfg.beta},
              {"gamma", cfg.gamma},
              {"learning_rate", cfg.learning_rate},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"loss_kind", to_string(cfg.loss_kind)},
              {"eval_episodes", cfg.eval_episodes},
              {"stochastic_eval", cfg.stochastic_eval}};
}

TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.beta = get_or(j, "beta", cfg.beta);
  cfg.gamma = get_or(j, "gamma", cfg.gamma);
  cfg.learning_rate = get_or(j, "learning_rate", cfg.learning_rate);
  cfg.epochs = get_or(j, "epochs", cfg.epochs);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.seed = get_or(j, "seed", cfg.seed);
  if (j.contains("loss_kind")) cfg.loss_kind = parse_loss_kind(get<std::string>(j, "loss_kind"));
  cfg.eval_episodes = get_or(j, "eval_episodes", cfg.eval_episodes);
  cfg.stochastic_eval = get_or(j, "stochastic_eval", cfg.stochastic_eval);
  cfg.validate();
  return cfg;
}

Json to_json(const EnvSpec& env) {
  return Json{{"name", env.name}, {"params", env.params}};
}

EnvSpec env_from_json(const Json& j) {
  EnvSpec env;
  env.name = get<std::string>(j, "name");
  if (j.contains("params")) {
    for (const auto& [key, value] : j.at("params").items()) {
      if (value.is_boolean()) {
        env.params[key] = value.get<bool>() ? 1.0 : 0.0;
      } else if (value.is_number()) {
        env.params[key] = value.get<double>();
      } else {
        throw ConfigError("env parameter '" + key + "' must be numeric");
      }
    }
  }
  return env;
}

Json to_json(const NoiseSpec& noise) {
  return Json{{"p_rep", noise.p_rep}, {"p_rand", noise.p_rand}};
}

NoiseSpec noise_from_json(const Json& j) {
  NoiseSpec noise;
  noise.p_rep = get_or(j, "p_rep", noise.p_rep);
  noise.p_rand = get_or(j, "p_rand", noise.p_rand);
  noise.validate();
  return noise;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string dataset_to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const PreferencePair& pair : pairs) {
    out += to_json(pair).dump();
    out += '\n';
  }
  return out;
}

std::vector<PreferencePair> dataset_from_jsonl(const std::string& text) {
  std::vector<PreferencePair> pairs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      pairs.push_back(pair_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("dataset line: ") + e.what());
    }
  }
  return pairs;
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& metrics) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricsRecord& m : metrics) {
    out += std::to_string(m.epoch) + "," + format_real(m.loss) + "," +
           format_real(m.avg_reward) + "," + format_real(m.avg_final_reward) + "," +
           format_real(m.compounding_error) + "," + format_real(m.pair_weight) + "\n";
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const SweepRow& r : rows) {
    out += r.label + "," + format_real(r.axis) + "," + std::to_string(r.seed) + "," +
           format_real(r.avg_final_reward) + "\n";
  }
  return out;
}

}  // namespace dmpo
