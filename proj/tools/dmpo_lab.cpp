// dmpo_lab: dataset generation, training, verification and sweeps.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dmpo/error.hpp"
#include "dmpo/experiment.hpp"
#include "dmpo/io.hpp"
#include "dmpo/occupancy.hpp"
#include "dmpo/verify.hpp"

namespace {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

dmpo::ExperimentConfig load(const Overrides& o) {
  dmpo::ExperimentConfig config = dmpo::load_experiment(o.config);
  if (o.seed) config.train.seed = *o.seed;
  if (o.output_dir) config.output_dir = *o.output_dir;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, Overrides& o, bool with_config) {
  if (with_config) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)")->required();
  }
  cmd->add_option("--seed", o.seed, "Override train.seed");
  cmd->add_option("--output-dir", o.output_dir, "Override output_dir");
}

int run_verify(const Overrides& o) {
  dmpo::VerifyOptions options;
  if (o.seed) options.seed = *o.seed;
  const auto results = dmpo::run_verification(options);
  bool all = true;
  dmpo::Json report = dmpo::Json::array();
  for (const auto& r : results) {
    std::printf("%s  %-62s measured=%.3e tol=%.1e%s%s\n", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.measured, r.tolerance, r.detail.empty() ? "" : "  ",
                r.detail.c_str());
    all = all && r.passed;
    report.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"measured", r.measured},
                      {"tolerance", r.tolerance},
                      {"detail", r.detail}});
  }
  if (o.output_dir) {
    // A worked example alongside the checks: uniform policy on a small chain.
    const dmpo::Mdp chain = dmpo::envs::chain({.n = 4, .slip = 0.1});
    const dmpo::Saom d = dmpo::saom_exact(
        chain, dmpo::TabularPolicy::uniform(chain.n_states(), chain.n_actions()),
        chain.max_horizon(), 0.9);
    const dmpo::Json doc{{"checks", report},
                         {"example",
                          {{"env", dmpo::to_json(chain)},
                           {"reference_saom", dmpo::to_json(d)},
                           {"optimum", dmpo::to_json(dmpo::optimal_saom(chain, d, 0.5))}}}};
    std::filesystem::path dir(*o.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw dmpo::IoError("cannot create " + dir.string() + ": " + ec.message());
    dmpo::write_json(dir / "verify_report.json", doc);
  }
  std::printf("%s\n", all ? "all checks passed" : "verification FAILED");
  return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference optimization lab for tabular MDPs"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, verify_o, sweep_o;
  std::string axis = "gamma";

  auto* gen = app.add_subcommand("gen", "Build a preference dataset and its reference policy");
  add_common(gen, gen_o, true);
  auto* train = app.add_subcommand("train", "Train with train.loss_kind (sft, dmpo, dpo_traj)");
  add_common(train, train_o, true);
  auto* verify = app.add_subcommand("verify", "Run the invariant battery; exit 1 on failure");
  add_common(verify, verify_o, false);
  auto* sweep = app.add_subcommand("sweep", "Sweep gamma or lose-trajectory length, emit CSV");
  add_common(sweep, sweep_o, true);
  sweep->add_option("--axis", axis, "gamma or length")
      ->check(CLI::IsMember({"gamma", "length"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      dmpo::cmd_gen(load(gen_o));
    } else if (*train) {
      dmpo::cmd_train(load(train_o));
    } else if (*verify) {
      return run_verify(verify_o);
    } else if (*sweep) {
      dmpo::cmd_sweep(load(sweep_o), dmpo::parse_sweep_axis(axis));
    }
  } catch (const dmpo::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const dmpo::GenerationExhaustedError& e) {
    std::cerr << "generation exhausted: " << e.what() << "\n";
    return kConfigError;
  } catch (const dmpo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
