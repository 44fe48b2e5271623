// Copyright 2026 The fedfraud Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedfraud/workflow.hpp"

using namespace fedfraud;
namespace fs = std::filesystem;

namespace {

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedfraud_wf_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

cli::RunConfig quick_config() {
  cli::RunConfig cfg;
  cfg.federation.max_rounds = 2;
  cfg.federation.hidden1 = 8;
  cfg.federation.hidden2 = 4;
  cfg.resolve();
  return cfg;
}

}  // namespace

TEST(Synthetic, PositiveCountWithinFourSigma) {
  synthetic::SyntheticSpec spec;
  spec.seed = 7;
  const auto csv = synthetic::generate_csv(spec);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0, pos = 0;
  while (std::getline(in, line)) {
    ++rows;
    pos += line[0] == '1';
  }
  EXPECT_EQ(rows, 2000u);
  const double sigma = std::sqrt(2000 * 0.1 * 0.9);
  EXPECT_LT(std::abs(static_cast<double>(pos) - 200.0), 4.0 * sigma);
  EXPECT_EQ(synthetic::generate_csv(spec), csv);
}

TEST_F(Scratch, SyntheticLoadsWithItsSchemaAndHasMissingCells) {
  synthetic::SyntheticSpec spec;
  cli::cmd_gen_synthetic(spec, dir_.string());
  const auto schema = data::load_schema(at(cli::kSchemaFile));
  const auto t = data::load_csv(at(cli::kSyntheticCsv), schema);
  EXPECT_EQ(t.row_count, 2000u);
  std::size_t missing = 0;
  for (const auto& c : t.columns) missing += c.missing_count();
  EXPECT_GT(missing, 0u);
  EXPECT_EQ(t.column("fraud_bool").missing_count(), 0u);
}

TEST_F(Scratch, PreprocessWritesFixedFilesDeterministically) {
  synthetic::SyntheticSpec spec;
  spec.n = 400;
  cli::cmd_gen_synthetic(spec, at("raw"));
  const auto cfg = quick_config();
  const auto r = cli::cmd_preprocess(at("raw/synthetic.csv"), cfg, at("a"));
  cli::cmd_preprocess(at("raw/synthetic.csv"), cfg, at("b"));
  for (const auto* f : {cli::kProcessedFile, cli::kCorrelationFile, cli::kTestFile, "shard_1.json", "shard_2.json",
                        "shard_3.json"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(r.shards.size(), 3u);
  for (const auto& s : r.shards) EXPECT_EQ(s.count_label(0), s.count_label(1));
  EXPECT_EQ(r.processed.rows(), r.test.rows() + data::train_row_count(r.processed.rows(), 0.8));
  for (const auto& n : r.processed.feature_names) EXPECT_NE(n, "fraud_bool");
}

TEST_F(Scratch, PreprocessMissingInputIsAnIoError) {
  EXPECT_THROW(cli::cmd_preprocess(at("nope.csv"), quick_config(), at("out")), IoError);
}

TEST_F(Scratch, SimulateHistoryMatchesRoundsAndIsSeedDeterministic) {
  synthetic::SyntheticSpec spec;
  spec.n = 400;
  cli::cmd_gen_synthetic(spec, at("raw"));
  auto cfg = quick_config();
  cfg.federation.max_rounds = 1;
  cfg.resolve();
  cli::cmd_preprocess(at("raw/synthetic.csv"), cfg, at("data"));
  const auto a = cli::cmd_simulate(at("data"), cfg, at("sim_a"));
  cli::cmd_simulate(at("data"), cfg, at("sim_b"));
  EXPECT_EQ(a.rounds_completed, 1u);
  EXPECT_EQ(metrics::load_history(at("sim_a/metrics_history.csv")).size(), a.rounds_completed);
  EXPECT_EQ(slurp(dir_ / "sim_a" / cli::kFinalParamsFile), slurp(dir_ / "sim_b" / cli::kFinalParamsFile));
  EXPECT_NE(cli::cmd_report(at("sim_a")).find("rounds completed: 1"), std::string::npos);

  const auto p = cli::cmd_predict(at("sim_a/final_params.json"), at("data/test.json"), at("pred"));
  EXPECT_EQ(p, nn::forward(nn::load_params(at("sim_a/final_params.json")), data::load_dataset(at("data/test.json")).features));

  // One report per client; the wide synthetic matrix needs sampling.
  EXPECT_THROW(cli::cmd_explain(at("sim_a/final_params.json"), at("data"), cfg, at("exp")), DataError);
  cfg.explain.sampled = true;
  cfg.explain.n_permutations = 50;
  const auto all = cli::cmd_explain(at("sim_a/final_params.json"), at("data"), cfg, at("exp"));
  EXPECT_EQ(all.size(), 3u);
  for (const auto& ce : all) {
    EXPECT_TRUE(fs::exists(dir_ / "exp" / (cli::explanation_stem(ce.client_id) + ".json")));
    for (const auto& r : ce.reports) EXPECT_TRUE(r.reconciles());
  }
}

TEST(Predict, ZeroModelGivesOneHalf) {
  nn::ModelConfig c;
  c.input_dim = 4;
  const auto p = nn::forward(nn::zero_model(c), Matrix(5, 4, 1.0));
  EXPECT_EQ(p, std::vector<double>(5, 0.5));
}

TEST_F(Scratch, ConfigFileThenFlagsPrecedence) {
  std::ofstream(at("cfg.json")) << R"({"seed": 9, "federation": {"max_rounds": 4, "training": {"epochs": 3}},
                                      "server": {"port": 6001}})";
  auto cfg = cli::load_run_config(at("cfg.json"));
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.federation.seed, 9u);
  EXPECT_EQ(cfg.federation.max_rounds, 4u);
  EXPECT_EQ(cfg.federation.training.epochs, 3u);
  EXPECT_EQ(cfg.federation.training.batch_size, 32u);
  EXPECT_EQ(cfg.server.port, 6001);
  EXPECT_EQ(cfg.server.federation.max_rounds, 4u);
  cfg.seed = 11;  // as a --seed flag would
  cfg.resolve();
  EXPECT_EQ(cfg.federation.seed, 11u);
  EXPECT_NE(cfg.split_seed(), cfg.shard_seed());

  const auto round_trip = cli::run_config_from_json(cli::run_config_to_json(cfg));
  EXPECT_EQ(cli::run_config_to_json(round_trip), cli::run_config_to_json(cfg));

  std::ofstream(at("bad.json")) << R"({"federation": {"max_rounds": "many"}})";
  EXPECT_THROW(cli::load_run_config(at("bad.json")), ConfigError);
  std::ofstream(at("zero.json")) << R"({"federation": {"max_rounds": 0}})";
  EXPECT_THROW(cli::load_run_config(at("zero.json")), ConfigError);
}
