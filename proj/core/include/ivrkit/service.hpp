// Copyright 2026 The ivrkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/dialogue.hpp"
#include "ivrkit/gateway.hpp"
#include "ivrkit/review.hpp"

namespace ivrkit {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path fsm;
  BackendProfile policy;
  std::size_t turn_budget = kDefaultTurnBudget;
  std::string template_version = std::string(kTemplateV1);
  // Review queue seeds, usually round human_queue.jsonl files.
  std::vector<std::filesystem::path> queue_files;
  // Committed verdicts are appended here; ingest_verdicts reads the same file.
  std::optional<std::filesystem::path> verdict_log;
  // Static assets (the review console build) served under /.
  std::optional<std::filesystem::path> static_dir;
};

/// Relative paths resolve against `base_dir`.
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// HTTP front end for live sessions and the review queue.
///
///   POST /session/start   {session_id?}                     -> session view
///   POST /session/step    {session_id, user_reply, ground_truth_transition?}
///   GET  /review/queue    ?status=&reason=&round=&page=&page_size=
///   GET  /review/item/{id}
///   POST /review/verdict  {sample_id, verdict, new_label?, annotator, annotation?}
///   GET  /metrics
///
/// Errors are {"error": {"code", "message"}} with a matching HTTP status.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void run();
  /// bind() plus run() on a background thread; returns the port.
  int start_background();
  void stop();

  ReviewStore& review();
  const FsmGraph& graph() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ivrkit
