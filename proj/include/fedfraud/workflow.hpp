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

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfraud/agent.hpp"
#include "fedfraud/coordinator.hpp"
#include "fedfraud/explain.hpp"
#include "fedfraud/federation.hpp"
#include "fedfraud/metrics.hpp"
#include "fedfraud/nn.hpp"
#include "fedfraud/pipeline.hpp"
#include "fedfraud/run_config.hpp"
#include "fedfraud/synthetic.hpp"

// The command bodies behind the fedfraud binary, kept in the library so tests
// can drive them without a subprocess.
namespace fedfraud::cli {

namespace fs = std::filesystem;

// Fixed artifact names under --out.
inline constexpr const char* kSyntheticCsv = "synthetic.csv";
inline constexpr const char* kSchemaFile = "schema.json";
inline constexpr const char* kProcessedFile = "processed.json";
inline constexpr const char* kCorrelationFile = "correlation.csv";
inline constexpr const char* kTestFile = "test.json";
inline constexpr const char* kResolvedConfigFile = "run_config.json";
inline constexpr const char* kSimulationReportFile = "simulation_report.json";
inline constexpr const char* kServeReportFile = "serve_report.json";
inline constexpr const char* kHistoryFile = "metrics_history.csv";
inline constexpr const char* kFinalParamsFile = "final_params.json";
inline constexpr const char* kPredictionsFile = "predictions.csv";

inline std::string shard_file(std::size_t k) { return "shard_" + std::to_string(k + 1) + ".json"; }
inline std::string explanation_stem(const std::string& client) { return "explanation_" + client; }
inline std::string agent_report_file(const std::string& client) { return "agent_" + client + ".json"; }

inline fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

// --- gen-synthetic -------------------------------------------------------------

inline void cmd_gen_synthetic(const synthetic::SyntheticSpec& spec, const std::string& out_dir) {
  const auto dir = ensure_dir(out_dir);
  synthetic::write_synthetic(spec, (dir / kSyntheticCsv).string(), (dir / kSchemaFile).string());
}

// --- preprocess ----------------------------------------------------------------

/// Schema lookup: an explicit path, "infer", a schema.json next to the CSV,
/// or the built-in transaction schema, in that order.
inline data::DatasetSchema resolve_schema(const RunConfig& cfg, const std::string& csv_path) {
  if (cfg.schema_path == "infer") return data::infer_schema(csv_path, cfg.pipeline.target);
  if (!cfg.schema_path.empty()) return data::load_schema(cfg.schema_path);
  const auto sibling = fs::path(csv_path).parent_path() / kSchemaFile;
  if (fs::exists(sibling)) return data::load_schema(sibling.string());
  return data::DatasetSchema::bank_account_fraud();
}

struct PreprocessResult {
  data::ProcessedDataset processed;
  data::ProcessedDataset test;
  std::vector<data::ProcessedDataset> shards;
  data::CorrelationMatrix correlation;
  std::vector<std::string> warnings;
};

/// Loads and cleans the raw table, then splits it: the held-out part becomes
/// the validation set, the rest is cut into one shard per client and each
/// shard is rebalanced separately.
inline PreprocessResult run_preprocess(const std::string& csv_path, const RunConfig& cfg) {
  cfg.validate();
  if (!fs::exists(csv_path)) throw IoError("input file not found: " + csv_path);
  const auto schema = resolve_schema(cfg, csv_path);
  auto pipeline = cfg.pipeline;
  pipeline.target = schema.target;
  const auto raw = data::load_csv(csv_path, schema);

  PreprocessResult r;
  r.processed = data::preprocess(raw, pipeline);
  r.correlation = data::correlation_matrix(data::cleaned_table(raw, pipeline));
  r.warnings = r.processed.metadata.warnings;
  r.warnings.insert(r.warnings.end(), r.correlation.warnings.begin(), r.correlation.warnings.end());

  const std::size_t k = cfg.federation.client_count;
  auto [train, test] = data::train_test_split(r.processed, {cfg.train_fraction, k, cfg.split_seed()});
  r.test = std::move(test);
  r.shards = data::shard(train, k, cfg.shard_seed());
  if (cfg.smote.enabled) {
    for (std::size_t s = 0; s < r.shards.size(); ++s) {
      const auto pos = r.shards[s].count_label(1);
      const auto neg = r.shards[s].rows() - pos;
      if (std::min(pos, neg) < 2) {
        r.warnings.push_back("SMOTE skipped for " + shard_file(s) + ": minority class has fewer than 2 rows");
        continue;
      }
      r.shards[s] = data::smote(r.shards[s], cfg.smote.k_neighbors, cfg.smote_seed(s));
    }
  }
  return r;
}

inline PreprocessResult cmd_preprocess(const std::string& csv_path, const RunConfig& cfg, const std::string& out_dir) {
  auto r = run_preprocess(csv_path, cfg);
  const auto dir = ensure_dir(out_dir);
  data::save_dataset(r.processed, (dir / kProcessedFile).string());
  write_text(dir / kCorrelationFile, data::correlation_to_csv(r.correlation));
  for (std::size_t s = 0; s < r.shards.size(); ++s) data::save_dataset(r.shards[s], (dir / shard_file(s)).string());
  data::save_dataset(r.test, (dir / kTestFile).string());
  write_json(dir / kResolvedConfigFile, run_config_to_json(cfg));
  return r;
}

// --- simulate --------------------------------------------------------------------

inline std::vector<fed::ClientShard> load_shards(const std::string& data_dir, std::size_t k) {
  std::vector<fed::ClientShard> out;
  for (std::size_t s = 0; s < k; ++s) {
    const auto p = fs::path(data_dir) / shard_file(s);
    if (!fs::exists(p)) throw IoError("missing shard file " + p.string() + " (was preprocess run with the same --clients?)");
    out.push_back({fed::client_name(s), data::load_dataset(p.string())});
  }
  return out;
}

inline data::ProcessedDataset load_test(const std::string& data_dir) {
  const auto p = fs::path(data_dir) / kTestFile;
  if (!fs::exists(p)) throw IoError("missing validation file " + p.string());
  return data::load_dataset(p.string());
}

inline void write_training_artifacts(const fs::path& dir, const nlohmann::json& report, const char* report_name,
                                     const std::vector<metrics::MetricsRecord>& history,
                                     const nn::ModelParams& params) {
  write_json(dir / report_name, report);
  metrics::save_history(history, (dir / kHistoryFile).string());
  nn::save_params(params, (dir / kFinalParamsFile).string());
}

inline fed::SimulationReport cmd_simulate(const std::string& data_dir, const RunConfig& cfg,
                                          const std::string& out_dir, std::ostream* log = nullptr) {
  cfg.validate();
  const auto shards = load_shards(data_dir, cfg.federation.client_count);
  const auto test = load_test(data_dir);
  const auto report = fed::simulate(cfg.federation, shards, test, [&](const fed::RoundState& s) {
    if (!log) return;
    const auto& m = s.history.back();
    char buf[160];
    std::snprintf(buf, sizeof buf, "round %3lld  accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f\n",
                  static_cast<long long>(m.round), m.accuracy, m.precision, m.recall, m.f1);
    *log << buf << std::flush;
  });
  write_training_artifacts(ensure_dir(out_dir), fed::report_to_json(report, kFinalParamsFile), kSimulationReportFile,
                           report.history, report.final_params);
  return report;
}

// --- serve / agent -------------------------------------------------------------

struct ServeOptions {
  /// How long to keep answering after the last round so agents can observe
  /// the finished status.
  int linger_ms = 2000;
};

inline fed::RoundState cmd_serve(const std::string& data_dir, const RunConfig& cfg, const std::string& out_dir,
                                 const ServeOptions& opts = {}, std::ostream* log = nullptr) {
  cfg.validate();
  service::Coordinator coordinator(cfg.server, load_test(data_dir));
  service::HttpServer http(coordinator);
  const int port = http.bind(cfg.server.host, cfg.server.port);
  http.start();
  if (log) *log << "listening on " << cfg.server.host << ':' << port << std::endl;
  while (!coordinator.wait_until_finished(std::chrono::milliseconds(1000))) {
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(opts.linger_ms));
  http.stop();
  const auto state = coordinator.snapshot();
  const nlohmann::json report{{"format", fed::kSimulationFormat},
                              {"config", fed::federation_config_to_json(cfg.federation)},
                              {"rounds_completed", state.round},
                              {"updates_total", state.updates_total},
                              {"history", state.history},
                              {"final_params", kFinalParamsFile}};
  write_training_artifacts(ensure_dir(out_dir), report, kServeReportFile, state.history, state.global);
  if (log) *log << "finished after " << state.round << " rounds, " << state.updates_total << " updates" << std::endl;
  return state;
}

inline agent::AgentReport cmd_agent(const agent::AgentConfig& a, const std::string& shard_path,
                                    const std::string& out_dir) {
  if (!fs::exists(shard_path)) throw IoError("shard file not found: " + shard_path);
  const auto report = agent::run_agent(a, shard_path);
  if (!out_dir.empty()) write_json(ensure_dir(out_dir) / agent_report_file(a.client_id), agent::report_to_json(report));
  return report;
}

// --- explain ---------------------------------------------------------------------

struct ClientExplanations {
  std::string client_id;
  std::vector<double> baseline;
  std::vector<explain::ExplanationReport> reports;
};

/// One set of reports per client: the shared global model, that client's
/// shard mean as baseline, and the requested validation rows as instances.
inline std::vector<ClientExplanations> run_explain(const nn::ModelParams& model,
                                                   const std::vector<fed::ClientShard>& shards,
                                                   const data::ProcessedDataset& test, const RunConfig& cfg) {
  cfg.validate();
  if (cfg.explain.rows.empty()) throw ConfigError("no rows to explain");
  if (model.config.input_dim != test.cols()) {
    throw DimensionError("model expects " + std::to_string(model.config.input_dim) + " features, data has " +
                         std::to_string(test.cols()));
  }
  const std::size_t d = test.cols();
  if (!cfg.explain.sampled && d > explain::kMaxExactFeatures) {
    throw DataError("exact Shapley values are limited to " + std::to_string(explain::kMaxExactFeatures) +
                    " features and this model has " + std::to_string(d) + "; rerun with --sampled");
  }
  std::vector<ClientExplanations> out;
  for (const auto& s : shards) {
    ClientExplanations ce;
    ce.client_id = s.client_id;
    ce.baseline = explain::feature_means(s.data);
    for (const auto row : cfg.explain.rows) {
      if (row >= test.rows()) {
        throw DataError("row " + std::to_string(row) + " out of range (validation set has " +
                        std::to_string(test.rows()) + " rows)");
      }
      const auto x = test.features.row(row);
      explain::CoalitionSpec spec{{x.begin(), x.end()}, ce.baseline};
      explain::ShapExplanation e;
      if (cfg.explain.sampled) {
        explain::SamplingOptions o;
        o.n_permutations = cfg.explain.n_permutations;
        o.exhaustive = cfg.explain.exhaustive;
        o.seed = derive_seed(cfg.explain_seed(), s.client_id + "#row-" + std::to_string(row));
        e = explain::shapley_sampled(model, spec, o, test.feature_names);
      } else {
        e = explain::shapley_exact(model, spec, test.feature_names);
      }
      ce.reports.push_back(explain::explanation_report(e, s.client_id + ", validation row " + std::to_string(row)));
    }
    out.push_back(std::move(ce));
  }
  return out;
}

inline std::vector<ClientExplanations> cmd_explain(const std::string& params_path, const std::string& data_dir,
                                                   const RunConfig& cfg, const std::string& out_dir) {
  const auto model = nn::load_params(params_path);
  const auto shards = load_shards(data_dir, cfg.federation.client_count);
  const auto test = load_test(data_dir);
  auto all = run_explain(model, shards, test, cfg);
  const auto dir = ensure_dir(out_dir);
  for (const auto& ce : all) {
    nlohmann::json reports = nlohmann::json::array();
    std::string text;
    for (const auto& r : ce.reports) {
      reports.push_back(explain::report_to_json(r));
      text += explain::render_text(r) + "\n";
    }
    write_json(dir / (explanation_stem(ce.client_id) + ".json"),
               {{"client_id", ce.client_id}, {"baseline", ce.baseline}, {"reports", reports}});
    write_text(dir / (explanation_stem(ce.client_id) + ".txt"), text);
  }
  return all;
}

// --- predict / report ------------------------------------------------------------

inline std::vector<double> cmd_predict(const std::string& params_path, const std::string& dataset_path,
                                       const std::string& out_dir) {
  const auto model = nn::load_params(params_path);
  const auto ds = data::load_dataset(dataset_path);
  const auto p = nn::forward(model, ds.features);
  std::string csv = "row,probability,label\n";
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", i, p[i], ds.labels.empty() ? -1 : ds.labels[i]);
    csv += buf;
  }
  write_text(ensure_dir(out_dir) / kPredictionsFile, csv);
  return p;
}

/// Text summary of a finished simulate or serve run directory.
inline std::string cmd_report(const std::string& run_dir) {
  const auto dir = fs::path(run_dir);
  fs::path report_path = dir / kSimulationReportFile;
  if (!fs::exists(report_path)) report_path = dir / kServeReportFile;
  const auto report = read_json(report_path);
  const auto history = metrics::load_history((dir / kHistoryFile).string());
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "run: %s\nrounds completed: %lld\nupdates received: %llu\n", run_dir.c_str(),
                report.value("rounds_completed", 0LL), report.value("updates_total", 0ULL));
  out += buf;
  if (report.contains("stopped_early")) out += std::string("stopped early: ") + (report["stopped_early"].get<bool>() ? "yes" : "no") + "\n";
  out += "\nround  accuracy  precision  recall    f1\n";
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%5lld  %8.4f  %9.4f  %6.4f  %6.4f\n", static_cast<long long>(m.round), m.accuracy,
                  m.precision, m.recall, m.f1);
    out += buf;
  }
  if (!history.empty()) {
    const auto best = std::max_element(history.begin(), history.end(),
                                       [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; });
    std::snprintf(buf, sizeof buf, "\nfinal accuracy %.4f, best %.4f at round %lld\n", history.back().accuracy,
                  best->accuracy, static_cast<long long>(best->round));
    out += buf;
  }
  return out;
}

}  // namespace fedfraud::cli
