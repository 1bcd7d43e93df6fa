// Runs the dmpo_lab binary end to end on small configs.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>

#include "dmpo/experiment.hpp"
#include "dmpo/io.hpp"

using namespace dmpo;
namespace fs = std::filesystem;

namespace {

struct LabRun {
  int code = -1;
  std::string out;
};

LabRun lab(const std::string& args) {
  const std::string cmd = std::string(DMPO_LAB_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {};
  LabRun run;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) run.out += buf.data();
  const int status = pclose(pipe);
  run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return run;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("dmpo_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  ExperimentConfig small() const {
    ExperimentConfig c;
    c.env = EnvSpec{"chain", {{"n", 6}, {"slip", 0.1}, {"start", 0}, {"horizon", 10}}};
    c.setting = Setting::kNoisy;
    c.train.epochs = 3;
    c.train.eval_episodes = 20;
    c.train.batch_size = 4;
    c.reference.epochs = 5;
    c.reference.learning_rate = 1.0;
    c.reference.eval_episodes = 20;
    c.dataset.n_pairs = 12;
    c.sweep.seeds = 2;
    c.sweep.gammas = {0.5};
    c.output_dir = (dir_ / "out").string();
    return c;
  }

  std::string write(const ExperimentConfig& c, const std::string& name = "config.json") const {
    const fs::path path = dir_ / name;
    write_json(path, to_json(c));
    return path.string();
  }

  std::string slurp(const std::string& name) const { return read_text(dir_ / "out" / name); }

  fs::path dir_;
};

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_F(Cli, HelpDocumentsEveryFlag) {
  for (const char* sub : {"gen", "train", "sweep"}) {
    const LabRun r = lab(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    for (const char* flag : {"--config", "--seed", "--output-dir"}) {
      EXPECT_NE(r.out.find(flag), std::string::npos) << sub << " " << flag;
    }
  }
  const LabRun verify = lab("verify --help");
  EXPECT_EQ(verify.code, 0);
  EXPECT_NE(verify.out.find("--seed"), std::string::npos);
  EXPECT_NE(lab("sweep --help").out.find("--axis"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(lab("").code, 2);
  EXPECT_EQ(lab("gen").code, 2);
  EXPECT_EQ(lab("sweep --config x --axis beta").code, 2);
}

TEST_F(Cli, MissingConfigFileExitsWithThree) {
  EXPECT_EQ(lab("gen --config " + (dir_ / "absent.json").string()).code, 3);
}

TEST_F(Cli, UnknownConfigKeyExitsWithTwo) {
  Json j = to_json(small());
  j["epochs"] = 3;
  write_json(dir_ / "bad.json", j);
  EXPECT_EQ(lab("gen --config " + (dir_ / "bad.json").string()).code, 2);
}

TEST_F(Cli, InvalidValueExitsWithTwo) {
  ExperimentConfig c = small();
  c.dataset.noise.p_rep = 0.9;
  c.dataset.noise.p_rand = 0.9;
  EXPECT_EQ(lab("gen --config " + write(c)).code, 2);
}

TEST_F(Cli, UnwritableOutputExitsWithThree) {
  write_text(dir_ / "file", "x");
  EXPECT_EQ(lab("gen --config " + write(small()) + " --output-dir " + (dir_ / "file/sub").string())
                .code,
            3);
}

TEST_F(Cli, GenOnShopMatchesManifest) {
  ExperimentConfig c = small();
  c.env = EnvSpec{"shop", {{"depth", 2}, {"branching", 2}}};
  c.setting = Setting::kClean;
  c.dataset.n_pairs = 10;
  ASSERT_EQ(lab("gen --config " + write(c)).code, 0);
  const auto pairs = dataset_from_jsonl(slurp("dataset.jsonl"));
  const Json manifest = Json::parse(slurp("manifest.json"));
  EXPECT_EQ(pairs.size(), 10u);
  EXPECT_EQ(manifest.at("pairs").get<std::size_t>(), pairs.size());
  EXPECT_EQ(manifest.at("setting"), "clean");
  EXPECT_EQ(manifest.at("env_name"), "shop");
}

TEST_F(Cli, GenIsByteIdenticalOnRerun) {
  const std::string cfg = write(small());
  ASSERT_EQ(lab("gen --config " + cfg).code, 0);
  const std::string dataset = slurp("dataset.jsonl");
  const std::string rest = slurp("manifest.json") + slurp("reference.json");
  ASSERT_EQ(lab("gen --config " + cfg).code, 0);
  EXPECT_EQ(slurp("dataset.jsonl"), dataset);
  EXPECT_EQ(slurp("manifest.json") + slurp("reference.json"), rest);
  ASSERT_EQ(lab("gen --config " + cfg + " --seed 5").code, 0);
  EXPECT_NE(slurp("dataset.jsonl"), dataset);
}

TEST_F(Cli, BucketCountsMatchFileContents) {
  ExperimentConfig c = small();
  c.env.params = {{"n", 10}, {"slip", 0.1}, {"start", 2}, {"horizon", 12}};
  c.dataset.buckets = {4, 8, 12};
  c.dataset.n_pairs = 15;
  c.dataset.noise = NoiseSpec{0.6, 0.3};
  ASSERT_EQ(lab("gen --config " + write(c)).code, 0);
  const auto pairs = dataset_from_jsonl(slurp("dataset.jsonl"));
  const DatasetManifest manifest = manifest_from_json(Json::parse(slurp("manifest.json")));
  ASSERT_EQ(manifest.length_buckets.size(), 3u);
  std::size_t lower = 0;
  std::size_t index = 0;
  for (const LengthBucket& b : manifest.length_buckets) {
    std::size_t recount = 0;
    for (std::size_t k = 0; k < b.pairs; ++k, ++index) {
      const std::size_t len = pairs.at(index).lose.length();
      recount += len > lower && len <= b.max_length ? 1 : 0;
    }
    EXPECT_EQ(recount, b.pairs);
    lower = b.max_length;
  }
  EXPECT_EQ(index, pairs.size());
}

TEST_F(Cli, SftTrainEmitsFrozenReference) {
  ExperimentConfig c = small();
  c.train.loss_kind = LossKind::kSft;
  ASSERT_EQ(lab("train --config " + write(c)).code, 0);
  const TabularPolicy ref = policy_from_json(Json::parse(slurp("reference.json")));
  EXPECT_TRUE(ref.frozen());
  EXPECT_EQ(count_lines(slurp("sft_metrics.csv")), 1 + c.reference.epochs);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "policy.json"));
}

TEST_F(Cli, PreferenceTrainIsByteIdenticalOnRerun) {
  const std::string cfg = write(small());
  ASSERT_EQ(lab("train --config " + cfg).code, 0);
  const std::string metrics = slurp("metrics.csv");
  const std::string policy = slurp("policy.json");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), kMetricsHeader);
  EXPECT_EQ(count_lines(metrics), 4u);
  ASSERT_EQ(lab("train --config " + cfg).code, 0);
  EXPECT_EQ(slurp("metrics.csv"), metrics);
  EXPECT_EQ(slurp("policy.json"), policy);
}

TEST_F(Cli, SavedConfigReproducesRun) {
  ASSERT_EQ(lab("train --config " + write(small())).code, 0);
  const std::string metrics = slurp("metrics.csv");
  const std::string saved = (dir_ / "saved.json").string();
  fs::copy_file(dir_ / "out" / "config.json", saved);
  ASSERT_EQ(lab("train --config " + saved).code, 0);
  EXPECT_EQ(slurp("metrics.csv"), metrics);
}

TEST_F(Cli, GammaSweepRowsPerSeed) {
  const std::string cfg = write(small());
  ASSERT_EQ(lab("sweep --axis gamma --config " + cfg).code, 0);
  const std::string csv = slurp("sweep_gamma.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepHeader);
  // One gamma: one row per (seed, setting).
  EXPECT_EQ(count_lines(csv), 1u + 2u * 2u);
  ASSERT_EQ(lab("sweep --axis gamma --config " + cfg).code, 0);
  EXPECT_EQ(slurp("sweep_gamma.csv"), csv);
}

TEST_F(Cli, LengthSweepRowCount) {
  ExperimentConfig c = small();
  c.env.params = {{"n", 10}, {"slip", 0.1}, {"start", 2}, {"horizon", 12}};
  c.dataset.buckets = {4, 8, 12};
  c.dataset.n_pairs = 9;
  c.dataset.noise = NoiseSpec{0.6, 0.3};
  ASSERT_EQ(lab("sweep --axis length --config " + write(c)).code, 0);
  EXPECT_EQ(count_lines(slurp("sweep_length.csv")), 1u + 2u * 3u * 2u);
}

TEST_F(Cli, VerifyWritesReport) {
  const LabRun r = lab("verify --output-dir " + (dir_ / "out").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
  const Json report = Json::parse(slurp("verify_report.json"));
  bool found = false;
  for (const Json& check : report.at("checks")) {
    EXPECT_TRUE(check.at("passed").get<bool>()) << check.at("name");
    if (check.at("name").get<std::string>().find("gradient") != std::string::npos) {
      found = true;
      EXPECT_LT(check.at("measured").get<double>(), 1e-6);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_TRUE(report.at("example").contains("optimum"));
}
