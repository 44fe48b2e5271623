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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fedfraud/error.hpp"
#include "fedfraud/federation.hpp"
#include "fedfraud/metrics.hpp"
#include "fedfraud/nn.hpp"

// Message bodies exchanged between coordinator and agents. Field names are
// documented in docs/protocol.md; everything here is structured text
// (JSON) and parameters travel as decimal arrays in the canonical params
// layout.
namespace fedfraud::protocol {

inline constexpr const char* kModelPath = "/api/v1/model";
inline constexpr const char* kRegisterPath = "/api/v1/register";
inline constexpr const char* kUpdatePath = "/api/v1/update";
inline constexpr const char* kStatusPath = "/api/v1/status";
inline constexpr const char* kMetricsPath = "/api/v1/metrics";

inline int http_status_for(fed::RejectReason r) {
  using R = fed::RejectReason;
  switch (r) {
    case R::malformed_request: return 400;
    case R::shape_mismatch:
    case R::nonfinite_params:
    case R::invalid_sample_count: return 422;
    default: return 409;
  }
}

inline nlohmann::json rejection(fed::RejectReason r, const std::string& message) {
  return {{"accepted", false}, {"error", {{"reason", fed::to_string(r)}, {"message", message}}}};
}

/// Body of POST /api/v1/update. Only parameters, the sample count and
/// metrics are carried.
inline nlohmann::json encode_update(const fed::ClientUpdate& u) {
  return {{"client_id", u.client_id},
          {"round", u.round},
          {"n_samples", u.n_samples},
          {"params", nn::params_to_json(u.params)},
          {"local_metrics", u.local_metrics}};
}

/// Envelope fields of an update request, parsed before the parameters so
/// that round and identity checks can run first.
struct UpdateEnvelope {
  std::string client_id;
  std::int64_t round = 0;
  std::int64_t n_samples = 0;
  metrics::MetricsRecord local_metrics;
};

inline UpdateEnvelope decode_update_envelope(const nlohmann::json& j) {
  try {
    UpdateEnvelope e;
    e.client_id = j.at("client_id").get<std::string>();
    e.round = j.at("round").get<std::int64_t>();
    e.n_samples = j.at("n_samples").get<std::int64_t>();
    if (j.contains("local_metrics") && !j.at("local_metrics").is_null()) {
      e.local_metrics = j.at("local_metrics").get<metrics::MetricsRecord>();
    }
    if (!j.contains("params")) throw ParseError("update has no params");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed update request: ") + ex.what());
  }
}

inline fed::ClientUpdate decode_update(const nlohmann::json& j) {
  const auto e = decode_update_envelope(j);
  fed::ClientUpdate u;
  u.client_id = e.client_id;
  u.round = e.round;
  if (e.n_samples < 0) throw ParseError("negative n_samples");
  u.n_samples = static_cast<std::size_t>(e.n_samples);
  u.local_metrics = e.local_metrics;
  u.params = nn::params_from_json(j.at("params"));
  return u;
}

/// Body of GET /api/v1/model.
struct ModelResponse {
  std::int64_t round = 0;
  bool finished = false;
  bool awaiting_update = false;
  std::uint64_t updates_total = 0;
  nn::ModelParams params;
};

inline nlohmann::json encode_model_response(const ModelResponse& m) {
  return {{"round", m.round},
          {"status", m.finished ? "finished" : "running"},
          {"awaiting_update", m.awaiting_update},
          {"updates_total", m.updates_total},
          {"model_config", nn::model_config_to_json(m.params.config)},
          {"params", nn::params_to_json(m.params)}};
}

inline ModelResponse decode_model_response(const nlohmann::json& j) {
  try {
    ModelResponse m;
    m.round = j.at("round").get<std::int64_t>();
    m.finished = j.at("status").get<std::string>() == "finished";
    m.awaiting_update = j.value("awaiting_update", false);
    m.updates_total = j.value("updates_total", std::uint64_t{0});
    m.params = nn::params_from_json(j.at("params"));
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed model response: ") + ex.what());
  }
}

/// Body returned by POST /api/v1/register.
struct Registration {
  std::string client_id;
  nn::ModelConfig model_config;
  nn::TrainingConfig training;
  int poll_interval_ms = 500;
  std::int64_t round = 0;
};

inline nlohmann::json encode_registration(const Registration& r) {
  return {{"accepted", true},
          {"client_id", r.client_id},
          {"model_config", nn::model_config_to_json(r.model_config)},
          {"training", nn::training_config_to_json(r.training)},
          {"poll_interval_ms", r.poll_interval_ms},
          {"round", r.round}};
}

inline Registration decode_registration(const nlohmann::json& j) {
  try {
    Registration r;
    r.client_id = j.at("client_id").get<std::string>();
    r.model_config = nn::model_config_from_json(j.at("model_config"));
    r.training = nn::training_config_from_json(j.at("training"));
    r.poll_interval_ms = j.value("poll_interval_ms", 500);
    r.round = j.value("round", std::int64_t{0});
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed registration response: ") + ex.what());
  }
}

}  // namespace fedfraud::protocol
