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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/metrics.hpp"
#include "fedfraud/nn.hpp"
#include "fedfraud/random.hpp"

namespace fedfraud::fed {

enum class ClientStatus { idle, training, updating };

inline std::string_view to_string(ClientStatus s) {
  switch (s) {
    case ClientStatus::idle: return "idle";
    case ClientStatus::training: return "training";
    case ClientStatus::updating: return "updating";
  }
  return "?";
}

/// idle -> training -> updating -> idle, nothing else.
inline bool valid_transition(ClientStatus from, ClientStatus to) {
  return (from == ClientStatus::idle && to == ClientStatus::training) ||
         (from == ClientStatus::training && to == ClientStatus::updating) ||
         (from == ClientStatus::updating && to == ClientStatus::idle);
}

inline std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

struct ClientState {
  ClientStatus status = ClientStatus::idle;
  std::int64_t last_transition_ms = 0;
  std::int64_t last_seen_ms = 0;
  std::vector<ClientStatus> trail;  // every status entered, oldest first
};

/// One client's contribution to a round. Carries parameters, a sample count
/// and metrics only; never feature rows or labels.
struct ClientUpdate {
  std::string client_id;
  std::int64_t round = 0;
  nn::ModelParams params;
  std::size_t n_samples = 0;
  metrics::MetricsRecord local_metrics;
};

enum class RejectReason {
  malformed_request,
  unregistered_client,
  registry_full,
  stale_round,
  future_round,
  duplicate_submission,
  shape_mismatch,
  nonfinite_params,
  invalid_sample_count,
  federation_finished,
};

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::malformed_request: return "malformed_request";
    case RejectReason::unregistered_client: return "unregistered_client";
    case RejectReason::registry_full: return "registry_full";
    case RejectReason::stale_round: return "stale_round";
    case RejectReason::future_round: return "future_round";
    case RejectReason::duplicate_submission: return "duplicate_submission";
    case RejectReason::shape_mismatch: return "shape_mismatch";
    case RejectReason::nonfinite_params: return "nonfinite_params";
    case RejectReason::invalid_sample_count: return "invalid_sample_count";
    case RejectReason::federation_finished: return "federation_finished";
  }
  return "?";
}

struct FederationConfig {
  std::size_t client_count = 3;
  std::size_t max_rounds = 30;
  std::size_t patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  nn::TrainingConfig training;
  bool parallel_clients = true;

  void validate() const {
    if (client_count < 1) throw ConfigError("client count must be >= 1");
    if (max_rounds < 1) throw ConfigError("max rounds must be >= 1");
    if (min_delta < 0.0) throw ConfigError("min delta must be >= 0");
    training.validate();
  }
};

inline nlohmann::json federation_config_to_json(const FederationConfig& c) {
  return {{"client_count", c.client_count}, {"max_rounds", c.max_rounds},
          {"patience", c.patience},         {"min_delta", c.min_delta},
          {"seed", c.seed},                 {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},           {"training", nn::training_config_to_json(c.training)}};
}

inline FederationConfig federation_config_from_json(const nlohmann::json& j, FederationConfig base = {}) {
  try {
    base.client_count = j.value("client_count", base.client_count);
    base.max_rounds = j.value("max_rounds", base.max_rounds);
    base.patience = j.value("patience", base.patience);
    base.min_delta = j.value("min_delta", base.min_delta);
    base.seed = j.value("seed", base.seed);
    base.hidden1 = j.value("hidden1", base.hidden1);
    base.hidden2 = j.value("hidden2", base.hidden2);
    if (j.contains("training")) base.training = nn::training_config_from_json(j.at("training"), base.training);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed federation config: ") + e.what());
  }
  base.validate();
  return base;
}

/// Client ids used by the in-process simulation: client-1 .. client-K.
inline std::string client_name(std::size_t index) { return "client-" + std::to_string(index + 1); }

inline nn::ModelConfig model_config_for(const FederationConfig& cfg, std::size_t input_dim) {
  nn::ModelConfig m;
  m.input_dim = input_dim;
  m.hidden1 = cfg.hidden1;
  m.hidden2 = cfg.hidden2;
  m.seed = derive_seed(cfg.seed, "model-init");
  return m;
}

/// Base training config as distributed to clients; its shuffle_seed is the
/// root from which per-client, per-round seeds are derived.
inline nn::TrainingConfig distributed_training_config(const FederationConfig& cfg) {
  nn::TrainingConfig t = cfg.training;
  t.shuffle_seed = derive_seed(cfg.seed, "local-training");
  return t;
}

/// Training config one client uses in one round. Depends only on the
/// distributed config, the client id and the round, so the same client
/// trains identically in-process and over the network.
inline nn::TrainingConfig client_round_config(const nn::TrainingConfig& distributed,
                                              std::string_view client_id, std::int64_t round) {
  nn::TrainingConfig t = distributed;
  t.shuffle_seed = derive_seed(distributed.shuffle_seed,
                               std::string(client_id) + "#round-" + std::to_string(round));
  return t;
}

inline metrics::MetricsRecord evaluate_model(const nn::ModelParams& params,
                                             const data::ProcessedDataset& ds, std::int64_t round) {
  if (ds.empty()) return metrics::MetricsRecord{round};
  return metrics::evaluate(nn::forward(params, ds.features), ds.labels, round);
}

/// Trains the global model on one shard. The returned update's n_samples is
/// the shard row count; metrics are measured on the shard after training.
inline ClientUpdate local_update(const nn::ModelParams& global, const data::ProcessedDataset& shard,
                                 const nn::TrainingConfig& cfg, std::string client_id,
                                 std::int64_t round) {
  if (shard.empty()) throw DataError("local_update: client '" + client_id + "' has an empty shard");
  auto trained = nn::train_local(global, shard, cfg);
  ClientUpdate u;
  u.client_id = std::move(client_id);
  u.round = round;
  u.local_metrics = evaluate_model(trained.params, shard, round);
  u.params = std::move(trained.params);
  u.n_samples = shard.rows();
  return u;
}

/// n_k / n for each update, in the order given.
inline std::vector<double> aggregation_weights(std::span<const ClientUpdate> updates) {
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.n_samples);
  std::vector<double> w;
  for (const auto& u : updates) w.push_back(static_cast<double>(u.n_samples) / total);
  return w;
}

/// Sample-weighted federated average sum_k (n_k / n) W_k.
///
/// Evaluated as a running weighted mean over updates sorted by client id:
/// acc <- acc + (n_k / N_k) (W_k - acc), where N_k counts samples seen so far.
/// The form is algebraically identical, returns identical inputs exactly, does
/// not depend on arrival order, and each result is clamped to the per-element
/// client range so rounding never leaves the convex hull.
inline nn::ModelParams aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw DataError("aggregate: no updates");
  std::vector<const ClientUpdate*> sorted;
  for (const auto& u : updates) {
    if (u.round != updates.front().round) throw DataError("aggregate: updates come from different rounds");
    if (u.n_samples < 1) throw DataError("aggregate: update with zero samples");
    if (!nn::detail::congruent(u.params.layers, updates.front().params.layers) ||
        u.params.config.input_dim != updates.front().params.config.input_dim) {
      throw DimensionError("aggregate: updates have different shapes");
    }
    sorted.push_back(&u);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  nn::ModelParams acc = sorted.front()->params;
  nn::ModelParams lo = acc;
  nn::ModelParams hi = acc;
  double seen = static_cast<double>(sorted.front()->n_samples);
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double nk = static_cast<double>(sorted[k]->n_samples);
    seen += nk;
    const double t = nk / seen;
    const auto& w = sorted[k]->params.layers;
    nn::detail::zip_values(acc.layers, w, [t](double& a, double x) { a += t * (x - a); });
    nn::detail::zip_values(lo.layers, w, [](double& a, double x) { a = std::min(a, x); });
    nn::detail::zip_values(hi.layers, w, [](double& a, double x) { a = std::max(a, x); });
  }
  nn::detail::zip_values(acc.layers, lo.layers, [](double& a, double x) { a = std::max(a, x); });
  nn::detail::zip_values(acc.layers, hi.layers, [](double& a, double x) { a = std::min(a, x); });
  return acc;
}

/// Coordinator-side view of the federation.
struct RoundState {
  std::int64_t round = 0;
  nn::ModelParams global;
  std::map<std::string, ClientState> registry;
  std::vector<ClientUpdate> pending;
  std::uint64_t updates_total = 0;
  std::vector<metrics::MetricsRecord> history;

  bool registered(const std::string& id) const { return registry.count(id) != 0; }

  void register_client(const std::string& id) {
    auto [it, inserted] = registry.try_emplace(id);
    const auto t = now_ms();
    if (inserted) {
      it->second.last_transition_ms = t;
      it->second.trail.push_back(ClientStatus::idle);
    }
    it->second.last_seen_ms = t;
  }

  void transition(const std::string& id, ClientStatus to) {
    auto it = registry.find(id);
    if (it == registry.end()) throw DataError("unknown client '" + id + "'");
    if (!valid_transition(it->second.status, to)) {
      throw DataError("illegal status transition " + std::string(to_string(it->second.status)) +
                      " -> " + std::string(to_string(to)) + " for client '" + id + "'");
    }
    it->second.status = to;
    it->second.last_transition_ms = it->second.last_seen_ms = now_ms();
    it->second.trail.push_back(to);
  }

  bool has_pending(const std::string& id) const {
    return std::any_of(pending.begin(), pending.end(),
                       [&](const ClientUpdate& u) { return u.client_id == id; });
  }

  /// Why `u` cannot join this round, if it cannot.
  std::optional<RejectReason> check(const ClientUpdate& u) const {
    if (!registered(u.client_id)) return RejectReason::unregistered_client;
    if (u.round < round) return RejectReason::stale_round;
    if (u.round > round) return RejectReason::future_round;
    if (has_pending(u.client_id)) return RejectReason::duplicate_submission;
    if (u.n_samples < 1) return RejectReason::invalid_sample_count;
    if (u.params.config.input_dim != global.config.input_dim ||
        u.params.config.hidden1 != global.config.hidden1 ||
        u.params.config.hidden2 != global.config.hidden2 ||
        !nn::detail::congruent(u.params.layers, global.layers)) {
      return RejectReason::shape_mismatch;
    }
    try {
      nn::validate_params(u.params);
    } catch (const NonFiniteError&) {
      return RejectReason::nonfinite_params;
    } catch (const DimensionError&) {
      return RejectReason::shape_mismatch;
    }
    return std::nullopt;
  }

  /// Stores a checked update and marks its client updating.
  void accept(ClientUpdate u) {
    if (const auto reason = check(u)) {
      throw DataError("update from '" + u.client_id + "' rejected: " + std::string(to_string(*reason)));
    }
    auto& st = registry.at(u.client_id);
    if (st.status == ClientStatus::idle) transition(u.client_id, ClientStatus::training);
    transition(u.client_id, ClientStatus::updating);
    pending.push_back(std::move(u));
  }

  /// Aggregates pending updates into the next global model, evaluates it on
  /// `validation` and returns every client to idle.
  const metrics::MetricsRecord& complete_round(const data::ProcessedDataset& validation) {
    if (pending.empty()) throw DataError("complete_round: no pending updates");
    global = aggregate(pending);
    updates_total += pending.size();
    pending.clear();
    round += 1;
    history.push_back(evaluate_model(global, validation, round));
    for (auto& [id, st] : registry) {
      if (st.status != ClientStatus::idle) transition(id, ClientStatus::idle);
    }
    return history.back();
  }
};

/// Stops once validation accuracy has failed to beat the best seen by more
/// than min_delta for `patience` consecutive rounds. patience 0 disables it.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true when training should stop after this observation.
  bool observe(double accuracy) {
    if (accuracy > best_ + min_delta_) {
      best_ = accuracy;
      stale_ = 0;
      return false;
    }
    ++stale_;
    return patience_ > 0 && stale_ >= patience_;
  }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

struct ClientShard {
  std::string client_id;
  data::ProcessedDataset data;
};

inline std::vector<ClientShard> name_shards(std::vector<data::ProcessedDataset> shards) {
  std::vector<ClientShard> out;
  for (std::size_t i = 0; i < shards.size(); ++i) out.push_back({client_name(i), std::move(shards[i])});
  return out;
}

inline RoundState initial_state(const FederationConfig& cfg, std::size_t input_dim) {
  RoundState s;
  s.global = nn::init_model(model_config_for(cfg, input_dim));
  return s;
}

/// One synchronous round: every client trains from the current global model,
/// then the server aggregates, evaluates and returns clients to idle. Any
/// client failure propagates and leaves the caller's state untouched.
inline RoundState run_round(RoundState state, std::span<const ClientShard> shards,
                            const FederationConfig& cfg, const data::ProcessedDataset& validation) {
  if (shards.size() != cfg.client_count) {
    throw ConfigError("expected " + std::to_string(cfg.client_count) + " shards, got " +
                      std::to_string(shards.size()));
  }
  const auto distributed = distributed_training_config(cfg);
  for (const auto& s : shards) {
    state.register_client(s.client_id);
    state.transition(s.client_id, ClientStatus::training);
  }
  std::vector<ClientUpdate> updates;
  if (cfg.parallel_clients && shards.size() > 1) {
    std::vector<std::future<ClientUpdate>> jobs;
    for (const auto& s : shards) {
      jobs.push_back(std::async(std::launch::async, [&, round = state.round] {
        return local_update(state.global, s.data, client_round_config(distributed, s.client_id, round),
                            s.client_id, round);
      }));
    }
    for (auto& j : jobs) updates.push_back(j.get());
  } else {
    for (const auto& s : shards) {
      updates.push_back(local_update(state.global, s.data,
                                     client_round_config(distributed, s.client_id, state.round),
                                     s.client_id, state.round));
    }
  }
  for (auto& u : updates) state.accept(std::move(u));
  state.complete_round(validation);
  return state;
}

struct SimulationReport {
  FederationConfig config;
  nn::ModelParams final_params;
  std::vector<metrics::MetricsRecord> history;
  std::size_t rounds_completed = 0;
  std::uint64_t updates_total = 0;
  bool stopped_early = false;
};

using RoundObserver = std::function<void(const RoundState&)>;

/// Repeats run_round until max_rounds or early stop.
inline SimulationReport simulate(const FederationConfig& cfg, std::span<const ClientShard> shards,
                                 const data::ProcessedDataset& validation,
                                 const RoundObserver& on_round = {}) {
  cfg.validate();
  if (shards.empty()) throw DataError("simulate: no client shards");
  if (validation.empty()) throw DataError("simulate: empty validation set");
  for (const auto& s : shards) {
    if (s.data.empty()) throw DataError("simulate: client '" + s.client_id + "' has an empty shard");
    if (s.data.cols() != validation.cols()) throw DimensionError("simulate: shard/validation width differ");
  }
  RoundState state = initial_state(cfg, validation.cols());
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  SimulationReport report;
  report.config = cfg;
  for (std::size_t r = 0; r < cfg.max_rounds; ++r) {
    state = run_round(std::move(state), shards, cfg, validation);
    if (on_round) on_round(state);
    if (stopper.observe(state.history.back().accuracy)) {
      report.stopped_early = r + 1 < cfg.max_rounds;
      break;
    }
  }
  report.final_params = state.global;
  report.history = state.history;
  report.rounds_completed = static_cast<std::size_t>(state.round);
  report.updates_total = state.updates_total;
  return report;
}

inline constexpr const char* kSimulationFormat = "fedfraud.simulation.v1";

inline nlohmann::json report_to_json(const SimulationReport& r, const std::string& params_file) {
  return {{"format", kSimulationFormat},
          {"config", federation_config_to_json(r.config)},
          {"rounds_completed", r.rounds_completed},
          {"updates_total", r.updates_total},
          {"stopped_early", r.stopped_early},
          {"history", r.history},
          {"final_params", params_file}};
}

}  // namespace fedfraud::fed
