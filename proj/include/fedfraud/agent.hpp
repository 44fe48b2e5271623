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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/federation.hpp"
#include "fedfraud/protocol.hpp"

namespace fedfraud::agent {

struct AgentConfig {
  std::string host = "127.0.0.1";
  int port = 5000;
  std::string client_id;
  /// Polling interval; 0 means use whatever the coordinator advertises.
  int poll_interval_ms = 0;
  /// Stop after this many accepted submissions (0 = until finished).
  std::size_t max_rounds = 0;
  /// Consecutive connection failures tolerated before giving up.
  int max_retries = 20;
  int timeout_ms = 30000;

  void validate() const {
    if (client_id.empty()) throw ConfigError("agent needs a client id");
    if (port <= 0 || port > 65535) throw ConfigError("agent port must be in [1, 65535]");
    if (max_retries < 0) throw ConfigError("max_retries must be non-negative");
  }
};

struct AgentReport {
  std::string client_id;
  std::size_t rounds_participated = 0;
  std::int64_t last_round = -1;
  std::size_t stale_refetches = 0;
  metrics::MetricsRecord last_local_metrics;
  bool federation_finished = false;
  std::string exit_reason;
};

inline nlohmann::json report_to_json(const AgentReport& r) {
  return {{"client_id", r.client_id},
          {"rounds_participated", r.rounds_participated},
          {"last_round", r.last_round},
          {"stale_refetches", r.stale_refetches},
          {"last_local_metrics", r.last_local_metrics},
          {"federation_finished", r.federation_finished},
          {"exit_reason", r.exit_reason}};
}

namespace detail {

struct Reply {
  int status = 0;
  nlohmann::json body;
};

class Channel {
 public:
  explicit Channel(const AgentConfig& cfg) : cfg_(cfg), client_(cfg.host, cfg.port) {
    const auto t = std::chrono::milliseconds(cfg.timeout_ms);
    client_.set_connection_timeout(t);
    client_.set_read_timeout(t);
    client_.set_write_timeout(t);
  }

  /// Sends one request, retrying connection failures with a fixed pause.
  template <typename Send>
  Reply call(const char* what, int pause_ms, Send&& send) {
    for (int attempt = 0;; ++attempt) {
      auto res = send(client_);
      if (res) {
        Reply r;
        r.status = res->status;
        try {
          r.body = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
          throw ProtocolError("malformed_response", std::string(what) + ": response is not JSON (HTTP " +
                                                        std::to_string(res->status) + ")");
        }
        return r;
      }
      if (attempt >= cfg_.max_retries) {
        throw NetworkError(std::string(what) + ": cannot reach coordinator at " + cfg_.host + ":" +
                           std::to_string(cfg_.port) + " (" + httplib::to_string(res.error()) + ")");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(pause_ms));
    }
  }

 private:
  const AgentConfig& cfg_;
  httplib::Client client_;
};

inline std::string reason_of(const nlohmann::json& body) {
  if (body.contains("error") && body["error"].is_object()) return body["error"].value("reason", "unknown");
  return "unknown";
}

inline std::string message_of(const nlohmann::json& body) {
  if (body.contains("error") && body["error"].is_object()) return body["error"].value("message", "");
  return body.dump();
}

}  // namespace detail

/// Runs the client role against a live coordinator: register, then repeat
/// fetch - train locally - submit until the federation finishes or
/// max_rounds submissions were accepted. Only parameters, the sample count
/// and local metrics leave this function; the shard never does.
inline AgentReport run_agent(const AgentConfig& cfg, const data::ProcessedDataset& shard) {
  cfg.validate();
  shard.validate();
  if (shard.empty()) throw DataError("agent '" + cfg.client_id + "' has an empty shard");

  detail::Channel ch(cfg);
  int pause = cfg.poll_interval_ms > 0 ? cfg.poll_interval_ms : 500;

  const nlohmann::json reg_body{{"client_id", cfg.client_id}};
  auto reg = ch.call("register", pause, [&](httplib::Client& c) {
    return c.Post(protocol::kRegisterPath, reg_body.dump(), "application/json");
  });
  if (reg.status != 200) {
    throw ProtocolError(detail::reason_of(reg.body), "registration refused: " + detail::message_of(reg.body));
  }
  const auto registration = protocol::decode_registration(reg.body);
  if (registration.model_config.input_dim != shard.cols()) {
    throw DimensionError("shard has " + std::to_string(shard.cols()) + " features, federation expects " +
                         std::to_string(registration.model_config.input_dim));
  }
  if (cfg.poll_interval_ms <= 0) pause = registration.poll_interval_ms;

  AgentReport report;
  report.client_id = cfg.client_id;
  const std::string model_path = std::string(protocol::kModelPath) + "?client_id=" + cfg.client_id;

  while (true) {
    auto got = ch.call("fetch model", pause, [&](httplib::Client& c) { return c.Get(model_path); });
    if (got.status != 200) {
      throw ProtocolError(detail::reason_of(got.body), "model fetch failed: " + detail::message_of(got.body));
    }
    const auto model = protocol::decode_model_response(got.body);
    if (model.finished) {
      report.federation_finished = true;
      report.exit_reason = "federation finished";
      return report;
    }
    if (!model.awaiting_update || model.round == report.last_round) {
      std::this_thread::sleep_for(std::chrono::milliseconds(pause));
      continue;
    }

    const auto round_cfg = fed::client_round_config(registration.training, cfg.client_id, model.round);
    const auto update = fed::local_update(model.params, shard, round_cfg, cfg.client_id, model.round);
    const auto body = protocol::encode_update(update).dump();
    auto sent = ch.call("submit update", pause, [&](httplib::Client& c) {
      return c.Post(protocol::kUpdatePath, body, "application/json");
    });

    if (sent.status == 200) {
      ++report.rounds_participated;
      report.last_round = model.round;
      report.last_local_metrics = update.local_metrics;
      if (cfg.max_rounds > 0 && report.rounds_participated >= cfg.max_rounds) {
        report.exit_reason = "reached max_rounds";
        return report;
      }
      continue;
    }
    const auto reason = detail::reason_of(sent.body);
    if (reason == "stale_round") {
      ++report.stale_refetches;
      continue;
    }
    if (reason == "federation_finished") {
      report.federation_finished = true;
      report.exit_reason = "federation finished";
      return report;
    }
    throw ProtocolError(reason, "update for round " + std::to_string(model.round) +
                                    " rejected: " + detail::message_of(sent.body));
  }
}

inline AgentReport run_agent(const AgentConfig& cfg, const std::string& shard_path) {
  return run_agent(cfg, data::load_dataset(shard_path));
}

}  // namespace fedfraud::agent
