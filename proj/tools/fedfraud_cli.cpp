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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fedfraud/workflow.hpp"

using namespace fedfraud;

namespace {

// Flags shared by the commands that read a RunConfig. Unset flags leave the
// config file (or default) value alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> clients;
  std::optional<std::size_t> rounds;
  std::optional<int> port;
  std::string out = "fedfraud_out";

  void add_to(CLI::App* sub, bool with_rounds, bool with_port) {
    sub->add_option("--config", config, "Run config file (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--clients", clients, "Number of clients / shards");
    if (with_rounds) sub->add_option("--rounds", rounds, "Maximum federation rounds");
    if (with_port) sub->add_option("--port", port, "Coordinator port (0 picks a free one)");
    sub->add_option("--out", out, "Output directory")->capture_default_str();
  }

  cli::RunConfig resolve() const {
    cli::RunConfig cfg;
    if (!config.empty()) cfg = cli::load_run_config(config, cfg);
    if (seed) cfg.seed = *seed;
    if (clients) cfg.federation.client_count = *clients;
    if (rounds) cfg.federation.max_rounds = *rounds;
    if (port) cfg.server.port = *port;
    cfg.resolve();
    return cfg;
  }
};

struct TrainingFlags {
  std::optional<std::size_t> epochs, batch_size, patience;
  std::optional<double> learning_rate;
  std::optional<std::string> optimizer;

  void add_to(CLI::App* sub) {
    sub->add_option("--epochs", epochs, "Local epochs per round");
    sub->add_option("--batch-size", batch_size, "Minibatch size");
    sub->add_option("--lr", learning_rate, "Learning rate");
    sub->add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    sub->add_option("--patience", patience, "Early-stop patience in rounds (0 disables)");
  }

  void apply(cli::RunConfig& cfg) const {
    auto& t = cfg.federation.training;
    if (epochs) t.epochs = *epochs;
    if (batch_size) t.batch_size = *batch_size;
    if (learning_rate) t.learning_rate = *learning_rate;
    if (optimizer) t.optimizer = nn::optimizer_from_string(*optimizer);
    if (patience) cfg.federation.patience = *patience;
    cfg.resolve();
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated fraud-detection toolkit: preprocessing, federated training, attribution"};
  app.require_subcommand(1);

  // gen-synthetic
  synthetic::SyntheticSpec syn;
  syn.seed = 42;
  std::string syn_out = "fedfraud_out";
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic raw table and its schema");
  gen->add_option("--n", syn.n, "Rows")->capture_default_str();
  gen->add_option("--d", syn.d, "Numeric feature columns")->capture_default_str();
  gen->add_option("--fraud-rate", syn.fraud_rate, "Fraction of positive rows")->capture_default_str();
  gen->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  gen->add_option("--missing-rate", syn.missing_rate, "Fraction of cells left empty")->capture_default_str();
  gen->add_option("--separation", syn.separation, "Class-mean shift in standard deviations")->capture_default_str();
  gen->add_option("--out", syn_out, "Output directory")->capture_default_str();

  // preprocess
  CommonFlags pre_flags;
  std::string pre_csv;
  std::optional<std::string> pre_schema;
  std::optional<double> pre_fraction;
  bool pre_no_smote = false;
  auto* pre = app.add_subcommand("preprocess", "Clean, encode, split and shard a raw CSV");
  pre->add_option("csv", pre_csv, "Raw CSV file")->required();
  pre->add_option("--schema", pre_schema, "Schema file, or 'infer'");
  pre->add_option("--train-fraction", pre_fraction, "Training share of the split");
  pre->add_flag("--no-smote", pre_no_smote, "Do not rebalance the client shards");
  pre_flags.add_to(pre, false, false);

  // simulate
  CommonFlags sim_flags;
  TrainingFlags sim_train;
  std::string sim_data;
  auto* sim = app.add_subcommand("simulate", "Run the federation in-process");
  sim->add_option("--data", sim_data, "Directory written by preprocess")->required()->check(CLI::ExistingDirectory);
  sim_flags.add_to(sim, true, false);
  sim_train.add_to(sim);

  // serve
  CommonFlags srv_flags;
  TrainingFlags srv_train;
  std::string srv_data;
  std::optional<std::string> srv_host;
  std::optional<int> srv_poll;
  cli::ServeOptions srv_opts;
  auto* srv = app.add_subcommand("serve", "Run the coordinator over HTTP");
  srv->add_option("--data", srv_data, "Directory holding test.json")->required()->check(CLI::ExistingDirectory);
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--poll-ms", srv_poll, "Polling interval advertised to agents");
  srv->add_option("--linger-ms", srv_opts.linger_ms, "Keep serving this long after the last round")->capture_default_str();
  srv_flags.add_to(srv, true, true);
  srv_train.add_to(srv);

  // agent
  agent::AgentConfig ag;
  std::string ag_shard, ag_out;
  auto* agt = app.add_subcommand("agent", "Run one client against a coordinator");
  agt->add_option("--shard", ag_shard, "Shard file")->required();
  agt->add_option("--client-id", ag.client_id, "Client id")->required();
  agt->add_option("--host", ag.host, "Coordinator address")->capture_default_str();
  agt->add_option("--port", ag.port, "Coordinator port")->capture_default_str();
  agt->add_option("--poll-ms", ag.poll_interval_ms, "Polling interval (0 = coordinator's)")->capture_default_str();
  agt->add_option("--max-rounds", ag.max_rounds, "Stop after this many rounds (0 = until finished)")->capture_default_str();
  agt->add_option("--retries", ag.max_retries, "Connection retries before giving up")->capture_default_str();
  agt->add_option("--out", ag_out, "Directory for the exit report");

  // explain
  CommonFlags exp_flags;
  std::string exp_params, exp_data;
  std::vector<std::size_t> exp_rows;
  bool exp_sampled = false, exp_exhaustive = false;
  std::optional<std::size_t> exp_perms;
  auto* exp = app.add_subcommand("explain", "Shapley attributions per client baseline");
  exp->add_option("--params", exp_params, "Model parameters file")->required()->check(CLI::ExistingFile);
  exp->add_option("--data", exp_data, "Directory written by preprocess")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--rows", exp_rows, "Validation row indices to explain")->delimiter(',');
  exp->add_flag("--sampled", exp_sampled, "Use permutation sampling");
  exp->add_option("--permutations", exp_perms, "Permutations for --sampled");
  exp->add_flag("--exhaustive", exp_exhaustive, "With --sampled, walk every ordering");
  exp_flags.add_to(exp, false, false);

  // report
  std::string rep_dir;
  auto* rep = app.add_subcommand("report", "Summarize a simulate or serve output directory");
  rep->add_option("dir", rep_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  // predict
  std::string prd_params, prd_data, prd_out = "fedfraud_out";
  auto* prd = app.add_subcommand("predict", "Score a processed dataset with a saved model");
  prd->add_option("--params", prd_params, "Model parameters file")->required()->check(CLI::ExistingFile);
  prd->add_option("--dataset", prd_data, "Processed dataset file")->required()->check(CLI::ExistingFile);
  prd->add_option("--out", prd_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage_error]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) {
      cli::cmd_gen_synthetic(syn, syn_out);
      std::cout << "wrote " << (cli::fs::path(syn_out) / cli::kSyntheticCsv).string() << " and "
                << (cli::fs::path(syn_out) / cli::kSchemaFile).string() << '\n';
    } else if (*pre) {
      auto cfg = pre_flags.resolve();
      if (pre_schema) cfg.schema_path = *pre_schema;
      if (pre_fraction) cfg.train_fraction = *pre_fraction;
      if (pre_no_smote) cfg.smote.enabled = false;
      const auto r = cli::cmd_preprocess(pre_csv, cfg, pre_flags.out);
      print_warnings(r.warnings);
      std::cout << "processed " << r.processed.rows() << " rows x " << r.processed.cols() << " features; "
                << r.shards.size() << " shards, " << r.test.rows() << " validation rows -> " << pre_flags.out << '\n';
    } else if (*sim) {
      auto cfg = sim_flags.resolve();
      sim_train.apply(cfg);
      const auto r = cli::cmd_simulate(sim_data, cfg, sim_flags.out, &std::cout);
      std::cout << "completed " << r.rounds_completed << " rounds (" << r.updates_total << " updates)"
                << (r.stopped_early ? ", stopped early" : "") << " -> " << sim_flags.out << '\n';
    } else if (*srv) {
      auto cfg = srv_flags.resolve();
      srv_train.apply(cfg);
      if (srv_host) cfg.server.host = *srv_host;
      if (srv_poll) cfg.server.poll_interval_ms = *srv_poll;
      cfg.resolve();
      cli::cmd_serve(srv_data, cfg, srv_flags.out, srv_opts, &std::cout);
    } else if (*agt) {
      const auto r = cli::cmd_agent(ag, ag_shard, ag_out);
      std::cout << agent::report_to_json(r).dump() << '\n';
    } else if (*exp) {
      auto cfg = exp_flags.resolve();
      if (!exp_rows.empty()) cfg.explain.rows = exp_rows;
      if (exp_sampled) cfg.explain.sampled = true;
      if (exp_exhaustive) cfg.explain.exhaustive = true;
      if (exp_perms) cfg.explain.n_permutations = *exp_perms;
      const auto all = cli::cmd_explain(exp_params, exp_data, cfg, exp_flags.out);
      for (const auto& ce : all) {
        for (const auto& r : ce.reports) std::cout << explain::render_text(r) << '\n';
      }
    } else if (*rep) {
      std::cout << cli::cmd_report(rep_dir);
    } else if (*prd) {
      const auto p = cli::cmd_predict(prd_params, prd_data, prd_out);
      std::cout << "scored " << p.size() << " rows -> " << (cli::fs::path(prd_out) / cli::kPredictionsFile).string()
                << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error[" << e.error_class() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal_error]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
