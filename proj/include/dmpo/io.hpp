#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmpo/datagen.hpp"
#include "dmpo/losses.hpp"
#include "dmpo/mdp.hpp"
#include "dmpo/occupancy.hpp"
#include "dmpo/policy.hpp"
#include "dmpo/trainer.hpp"

namespace dmpo {

using Json = nlohmann::json;

Json to_json(const Mdp& mdp);
Mdp mdp_from_json(const Json& j);

Json to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const Json& j);

Json to_json(const Table& table);
Table table_from_json(const Json& j);

Json to_json(const Saom& saom);
Json to_json(const SaomSolution& solution);

Json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);

Json to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const Json& j);

Json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const Json& j);

Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults = {});

Json to_json(const EnvSpec& env);
EnvSpec env_from_json(const Json& j);

Json to_json(const NoiseSpec& noise);
NoiseSpec noise_from_json(const Json& j);

/// Decimal text that parses back to the same double (printf %.17g).
std::string format_real(double v);

/// File helpers; failures raise IoError.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// One pair per line: {"win": {"states": [...], "actions": [...]}, "lose": ...}
std::string dataset_to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> dataset_from_jsonl(const std::string& text);

inline constexpr const char* kMetricsHeader =
    "epoch,loss,avg_reward,avg_final_reward,compounding_error,pair_weight";
inline constexpr const char* kSweepHeader = "setting/loss_kind,gamma_or_bucket,seed,avg_final_reward";

std::string metrics_to_csv(const std::vector<MetricsRecord>& metrics);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace dmpo
