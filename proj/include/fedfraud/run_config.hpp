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
#include <optional>
#include <string>

#include "json.hpp"

#include "fedfraud/coordinator.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/federation.hpp"
#include "fedfraud/pipeline.hpp"
#include "fedfraud/random.hpp"

// One structured config document for every command. Resolution order, later
// wins: built-in defaults, then the --config file, then command-line flags.
namespace fedfraud::cli {

struct SmoteSettings {
  bool enabled = true;
  std::size_t k_neighbors = 5;
};

struct ExplainSettings {
  std::vector<std::size_t> rows{0};
  bool sampled = false;
  std::size_t n_permutations = 2000;
  bool exhaustive = false;
};

struct RunConfig {
  std::uint64_t seed = 42;
  /// Schema document; empty means the built-in transaction schema, or
  /// "infer" to derive one from the file.
  std::string schema_path;
  double train_fraction = 0.8;
  data::PipelineConfig pipeline;
  SmoteSettings smote;
  fed::FederationConfig federation;
  service::ServerConfig server;
  ExplainSettings explain;

  /// Per-stage seeds, all fanned out from `seed`.
  std::uint64_t split_seed() const { return derive_seed(seed, "split"); }
  std::uint64_t shard_seed() const { return derive_seed(seed, "shard"); }
  std::uint64_t smote_seed(std::size_t shard) const { return derive_seed(seed, "smote#" + std::to_string(shard)); }
  std::uint64_t explain_seed() const { return derive_seed(seed, "explain"); }

  /// Pushes shared settings into the nested configs. Call after every change.
  void resolve() {
    federation.seed = seed;
    server.federation = federation;
  }

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (pipeline.n_bins < 1) throw ConfigError("n_bins must be >= 1");
    if (smote.k_neighbors < 1) throw ConfigError("smote k_neighbors must be >= 1");
    if (explain.n_permutations < 1) throw ConfigError("explain n_permutations must be >= 1");
    federation.validate();
    server.validate();
    if (!schema_path.empty() && schema_path != "infer" && !std::filesystem::exists(schema_path)) {
      throw IoError("schema file not found: " + schema_path);
    }
  }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"schema", c.schema_path},
          {"split", {{"train_fraction", c.train_fraction}}},
          {"pipeline",
           {{"target", c.pipeline.target},
            {"binned_column", c.pipeline.binned_column},
            {"binned_name", c.pipeline.binned_name},
            {"n_bins", c.pipeline.n_bins},
            {"one_hot_columns", c.pipeline.one_hot_columns},
            {"remove_outliers", c.pipeline.remove_outliers},
            {"iqr_multiplier", c.pipeline.iqr_multiplier}}},
          {"smote", {{"enabled", c.smote.enabled}, {"k_neighbors", c.smote.k_neighbors}}},
          {"federation", fed::federation_config_to_json(c.federation)},
          {"server",
           {{"host", c.server.host},
            {"port", c.server.port},
            {"poll_interval_ms", c.server.poll_interval_ms},
            {"allow_cross_origin", c.server.allow_cross_origin}}},
          {"explain",
           {{"rows", c.explain.rows},
            {"sampled", c.explain.sampled},
            {"n_permutations", c.explain.n_permutations},
            {"exhaustive", c.explain.exhaustive}}}};
}

/// Overlays the keys present in `j` onto `base`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  try {
    base.seed = j.value("seed", base.seed);
    base.schema_path = j.value("schema", base.schema_path);
    if (j.contains("split")) base.train_fraction = j["split"].value("train_fraction", base.train_fraction);
    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      auto& c = base.pipeline;
      c.target = p.value("target", c.target);
      c.binned_column = p.value("binned_column", c.binned_column);
      c.binned_name = p.value("binned_name", c.binned_name);
      c.n_bins = p.value("n_bins", c.n_bins);
      c.one_hot_columns = p.value("one_hot_columns", c.one_hot_columns);
      c.remove_outliers = p.value("remove_outliers", c.remove_outliers);
      c.iqr_multiplier = p.value("iqr_multiplier", c.iqr_multiplier);
    }
    if (j.contains("smote")) {
      base.smote.enabled = j["smote"].value("enabled", base.smote.enabled);
      base.smote.k_neighbors = j["smote"].value("k_neighbors", base.smote.k_neighbors);
    }
    if (j.contains("federation")) {
      base.federation = fed::federation_config_from_json(j["federation"], base.federation);
      base.federation.parallel_clients = j["federation"].value("parallel_clients", base.federation.parallel_clients);
    }
    if (j.contains("server")) {
      const auto& s = j["server"];
      base.server.host = s.value("host", base.server.host);
      base.server.port = s.value("port", base.server.port);
      base.server.poll_interval_ms = s.value("poll_interval_ms", base.server.poll_interval_ms);
      base.server.allow_cross_origin = s.value("allow_cross_origin", base.server.allow_cross_origin);
    }
    if (j.contains("explain")) {
      const auto& e = j["explain"];
      base.explain.rows = e.value("rows", base.explain.rows);
      base.explain.sampled = e.value("sampled", base.explain.sampled);
      base.explain.n_permutations = e.value("n_permutations", base.explain.n_permutations);
      base.explain.exhaustive = e.value("exhaustive", base.explain.exhaustive);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  base.resolve();
  return base;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

}  // namespace fedfraud::cli
