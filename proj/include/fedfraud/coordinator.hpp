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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/federation.hpp"
#include "fedfraud/protocol.hpp"

namespace fedfraud::service {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 5000;
  fed::FederationConfig federation;
  bool allow_cross_origin = true;
  int poll_interval_ms = 500;

  std::size_t expected_clients() const { return federation.client_count; }

  void validate() const {
    if (port < 0 || port > 65535) throw ConfigError("port must be in [1, 65535] (0 picks a free port)");
    if (poll_interval_ms <= 0) throw ConfigError("poll interval must be positive");
    federation.validate();
  }
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Server role of the federation, independent of transport. Every handler
/// takes the single state mutex, so aggregation runs exactly once per round
/// however requests interleave.
class Coordinator {
 public:
  Coordinator(ServerConfig cfg, data::ProcessedDataset validation)
      : cfg_(std::move(cfg)),
        validation_(std::move(validation)),
        stopper_(cfg_.federation.patience, cfg_.federation.min_delta) {
    cfg_.validate();
    if (validation_.empty()) throw DataError("coordinator needs a non-empty validation set");
    state_ = fed::initial_state(cfg_.federation, validation_.cols());
    training_ = fed::distributed_training_config(cfg_.federation);
  }

  const ServerConfig& config() const { return cfg_; }

  Response get_model(const std::optional<std::string>& client_id = std::nullopt) {
    std::lock_guard lock(mu_);
    protocol::ModelResponse m;
    m.round = state_.round;
    m.finished = finished_;
    m.updates_total = state_.updates_total;
    m.params = state_.global;
    if (client_id && state_.registered(*client_id)) {
      auto& st = state_.registry.at(*client_id);
      st.last_seen_ms = fed::now_ms();
      m.awaiting_update = !finished_ && !state_.has_pending(*client_id);
      if (m.awaiting_update && st.status == fed::ClientStatus::idle) {
        state_.transition(*client_id, fed::ClientStatus::training);
      }
    }
    return {200, protocol::encode_model_response(m)};
  }

  Response register_client(const std::string& body) {
    std::string id;
    try {
      const auto j = nlohmann::json::parse(body);
      id = j.at("client_id").get<std::string>();
    } catch (const std::exception& e) {
      return reject(fed::RejectReason::malformed_request, std::string("bad register request: ") + e.what());
    }
    if (id.empty()) return reject(fed::RejectReason::malformed_request, "client_id must be non-empty");
    std::lock_guard lock(mu_);
    if (!state_.registered(id) && state_.registry.size() >= cfg_.expected_clients()) {
      return reject(fed::RejectReason::registry_full,
                    "federation already has " + std::to_string(cfg_.expected_clients()) + " clients");
    }
    state_.register_client(id);
    protocol::Registration r{id, state_.global.config, training_, cfg_.poll_interval_ms, state_.round};
    return {200, protocol::encode_registration(r)};
  }

  Response post_update(const std::string& body) {
    nlohmann::json j;
    protocol::UpdateEnvelope env;
    try {
      j = nlohmann::json::parse(body);
      env = protocol::decode_update_envelope(j);
    } catch (const std::exception& e) {
      return reject(fed::RejectReason::malformed_request, e.what());
    }

    std::lock_guard lock(mu_);
    if (finished_) return reject(fed::RejectReason::federation_finished, "federation has finished");
    if (!state_.registered(env.client_id)) {
      return reject(fed::RejectReason::unregistered_client, "client '" + env.client_id + "' is not registered");
    }
    if (env.round < state_.round) {
      return reject(fed::RejectReason::stale_round, "update for round " + std::to_string(env.round) +
                                                        ", current round is " + std::to_string(state_.round));
    }
    if (env.round > state_.round) {
      return reject(fed::RejectReason::future_round, "update for round " + std::to_string(env.round) +
                                                         ", current round is " + std::to_string(state_.round));
    }
    if (state_.has_pending(env.client_id)) {
      return reject(fed::RejectReason::duplicate_submission,
                    "client '" + env.client_id + "' already submitted for round " + std::to_string(state_.round));
    }

    fed::ClientUpdate u;
    try {
      u = protocol::decode_update(j);
    } catch (const NonFiniteError& e) {
      return reject(fed::RejectReason::nonfinite_params, e.what());
    } catch (const DimensionError& e) {
      return reject(fed::RejectReason::shape_mismatch, e.what());
    } catch (const Error& e) {
      return reject(fed::RejectReason::malformed_request, e.what());
    }
    if (const auto reason = state_.check(u)) return reject(*reason, "update rejected");

    const auto submitted_round = state_.round;
    state_.accept(std::move(u));
    bool aggregated = false;
    if (state_.pending.size() == cfg_.expected_clients()) {
      const auto& rec = state_.complete_round(validation_);
      aggregated = true;
      if (static_cast<std::size_t>(state_.round) >= cfg_.federation.max_rounds || stopper_.observe(rec.accuracy)) {
        finished_ = true;
      }
      cv_.notify_all();
    }
    return {200,
            {{"accepted", true},
             {"round", submitted_round},
             {"aggregated", aggregated},
             {"current_round", state_.round},
             {"pending", state_.pending.size()},
             {"updates_total", state_.updates_total},
             {"finished", finished_}}};
  }

  Response get_status() const {
    std::lock_guard lock(mu_);
    nlohmann::json clients = nlohmann::json::array();
    for (const auto& [id, st] : state_.registry) {
      clients.push_back({{"id", id},
                         {"status", fed::to_string(st.status)},
                         {"last_seen", st.last_seen_ms},
                         {"last_transition", st.last_transition_ms}});
    }
    return {200,
            {{"round", state_.round},
             {"updates_total", state_.updates_total},
             {"expected_clients", cfg_.expected_clients()},
             {"finished", finished_},
             {"clients", clients}}};
  }

  Response get_metrics() const {
    std::lock_guard lock(mu_);
    return {200, {{"history", state_.history}}};
  }

  bool finished() const {
    std::lock_guard lock(mu_);
    return finished_;
  }

  /// Blocks until the federation finishes or the timeout passes.
  bool wait_until_finished(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [this] { return finished_; });
  }

  fed::RoundState snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

 private:
  static Response reject(fed::RejectReason r, const std::string& message) {
    return {protocol::http_status_for(r), protocol::rejection(r, message)};
  }

  ServerConfig cfg_;
  data::ProcessedDataset validation_;
  fed::EarlyStopper stopper_;
  nn::TrainingConfig training_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  fed::RoundState state_;
  bool finished_ = false;
};

namespace detail {

// httplib only releases its socket from a running listen loop; this lets a
// server that was bound but never started give the port back.
class Listener : public httplib::Server {
 public:
  void close_unstarted() {
    if (is_running()) return;
    const auto sock = svr_sock_.exchange(INVALID_SOCKET);
    if (sock != INVALID_SOCKET) httplib::detail::close_socket(sock);
  }
};

// SO_REUSEADDR without SO_REUSEPORT, so a second server on a busy port fails
// to bind instead of sharing it.
inline void exclusive_socket_options(socket_t sock) {
  int yes = 1;
  setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
}

}  // namespace detail

/// HTTP binding of a Coordinator.
class HttpServer {
 public:
  using RequestTap = std::function<void(const std::string& method, const std::string& path, const std::string& body)>;

  explicit HttpServer(Coordinator& coordinator, RequestTap tap = {})
      : coordinator_(coordinator), tap_(std::move(tap)) {
    install_routes();
  }

  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int bound = server_.bind_to_any_port(host);
      if (bound <= 0) throw NetworkError("cannot bind " + host + " to any port");
      port_ = bound;
    } else {
      if (!server_.bind_to_port(host, port)) {
        throw NetworkError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
      }
      port_ = port;
    }
    return port_;
  }

  int port() const { return port_; }

  /// Serves on the calling thread until stop().
  void run() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { run(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
    server_.close_unstarted();
  }

 private:
  void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  void note(const httplib::Request& req) {
    if (tap_) tap_(req.method, req.path, req.body);
  }

  void install_routes() {
    server_.set_socket_options(detail::exclusive_socket_options);
    const bool cors = coordinator_.config().allow_cross_origin;
    server_.set_post_routing_handler([cors](const httplib::Request&, httplib::Response& res) {
      if (!cors) return;
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    server_.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.Get(protocol::kModelPath, [this](const httplib::Request& req, httplib::Response& res) {
      note(req);
      std::optional<std::string> id;
      if (req.has_param("client_id")) id = req.get_param_value("client_id");
      reply(res, coordinator_.get_model(id));
    });
    server_.Post(protocol::kRegisterPath, [this](const httplib::Request& req, httplib::Response& res) {
      note(req);
      reply(res, coordinator_.register_client(req.body));
    });
    server_.Post(protocol::kUpdatePath, [this](const httplib::Request& req, httplib::Response& res) {
      note(req);
      reply(res, coordinator_.post_update(req.body));
    });
    server_.Get(protocol::kStatusPath, [this](const httplib::Request& req, httplib::Response& res) {
      note(req);
      reply(res, coordinator_.get_status());
    });
    server_.Get(protocol::kMetricsPath, [this](const httplib::Request& req, httplib::Response& res) {
      note(req);
      reply(res, coordinator_.get_metrics());
    });
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(nlohmann::json{{"accepted", false}, {"error", {{"reason", "internal_error"}, {"message", what}}}}.dump(),
                      "application/json");
    });
    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const auto reason = res.status == 404 ? "not_found" : "malformed_request";
      res.set_content(nlohmann::json{{"accepted", false}, {"error", {{"reason", reason}, {"message", "no such endpoint"}}}}.dump(),
                      "application/json");
    });
  }

  Coordinator& coordinator_;
  RequestTap tap_;
  detail::Listener server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace fedfraud::service
