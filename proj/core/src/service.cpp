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

#include "ivrkit/service.hpp"

#include <chrono>
#include <ctime>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "ivrkit/jsonl.hpp"
#include "ivrkit/metrics.hpp"

namespace ivrkit {

using json = nlohmann::json;

ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ServiceConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.fsm = resolve(j.at("fsm").get<std::string>());
  auto policy = j.contains("backends") ? j.at("backends").at("policy") : j.at("policy");
  if (!policy.contains("role")) policy["role"] = "policy";
  c.policy = profile_from_json(policy, base_dir);
  c.turn_budget = j.value("turn_budget", c.turn_budget);
  c.template_version = j.value("template_version", c.template_version);
  for (const auto& q : j.value("queue_files", json::array())) c.queue_files.push_back(resolve(q.get<std::string>()));
  if (j.contains("verdict_log")) c.verdict_log = resolve(j.at("verdict_log").get<std::string>());
  if (j.contains("static_dir")) c.static_dir = resolve(j.at("static_dir").get<std::string>());
  return c;
}

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
  send_json(res, e.status, json{{"error", {{"code", e.code}, {"message", e.message}}}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto body = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!body.is_object()) throw HttpError{400, "bad_request", "request body must be a JSON object"};
    return body;
  } catch (const json::parse_error& e) {
    throw HttpError{400, "bad_request", std::string("malformed JSON: ") + e.what()};
  }
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback,
                       std::size_t min = 1) {
  if (!req.has_param(name)) return fallback;
  const auto v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    if (v.empty() || v.front() == '-') throw std::invalid_argument(v);
    const auto n = std::stoul(v, &used);
    if (used != v.size() || n < min) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw HttpError{400, "bad_request",
                    std::string(name) + (min == 0 ? " must be a non-negative integer" : " must be a positive integer")};
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct LiveSession {
  std::mutex mu;
  SessionState state;
  std::vector<GenerationRecord> records;
};

json session_view(const SessionState& s) {
  json j{{"session_id", s.session_id},
         {"state", s.current_state.str()},
         {"agent_query", s.pending_query},
         {"status", to_string(s.status)},
         {"retry_count", s.retry_count},
         {"turns_taken", s.turns_taken}};
  json attrs = json::object();
  for (const auto& [goal, a] : s.acquired_attributes)
    attrs[goal] = {{"reply_class", a.reply_class}, {"utterance", a.utterance}};
  j["acquired_attributes"] = attrs;
  return j;
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<const FsmGraph> graph;
  Client policy;
  ReviewStore review;
  httplib::Server server;
  std::thread worker;
  int port = -1;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::size_t next_session = 0;

  explicit Impl(ServiceConfig c)
      : config(std::move(c)),
        graph(std::make_shared<const FsmGraph>(load_fsm_file(config.fsm))),
        policy(make_client(config.policy, graph)),
        review(config.verdict_log) {
    for (const auto& file : config.queue_files)
      for (const auto& row : read_jsonl(file)) review.enqueue(row.get<ReviewItem>());
    routes();
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_error(res, e);
      } catch (const json::exception& e) {
        send_error(res, {400, "bad_request", e.what()});
      } catch (const std::invalid_argument& e) {
        send_error(res, {422, "validation_error", e.what()});
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, {500, "internal", e.what()});
      }
    };
  }

  std::shared_ptr<LiveSession> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "not_found", "unknown session '" + id + "'"};
    return it->second;
  }

  void routes() {
    server.Post("/session/start", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      std::lock_guard lock(sessions_mu);
      std::string id = body.value("session_id", std::string());
      if (id.empty()) id = "live-" + std::to_string(next_session++);
      if (sessions.contains(id)) throw HttpError{409, "conflict", "session '" + id + "' exists"};
      auto live = std::make_shared<LiveSession>();
      live->state = start_session(graph, body.value("turn_budget", config.turn_budget), id);
      sessions.emplace(id, live);
      send_json(res, 200, session_view(live->state));
    }));

    server.Post("/session/step", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      auto live = find_session(body.at("session_id").get<std::string>());
      UserReply reply{body.at("user_reply").get<std::string>(), std::nullopt};
      if (body.contains("ground_truth_transition") && !body.at("ground_truth_transition").is_null())
        reply.ground_truth_transition = body.at("ground_truth_transition").get<std::size_t>();
      std::lock_guard lock(live->mu);
      StepResult r;
      try {
        r = step(live->state, policy, reply, {config.template_version, 0, live->records.size()});
      } catch (const SessionClosed& e) {
        throw HttpError{409, "session_closed", e.what()};
      }
      live->records.push_back(r.record);
      auto view = session_view(live->state);
      view["action"] = {{"kind", to_string(r.action.kind)}, {"query", r.action.query}};
      view["record"] = r.record;
      view["turn"] = r.turn;
      send_json(res, 200, view);
    }));

    server.Get("/review/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
      ReviewStore::Query q;
      try {
        if (req.has_param("status")) q.status = item_status_from_string(req.get_param_value("status"));
        if (req.has_param("reason")) q.reason = routing_reason_from_string(req.get_param_value("reason"));
      } catch (const std::invalid_argument& e) {
        throw HttpError{400, "bad_request", e.what()};
      }
      if (req.has_param("round")) q.round = static_cast<int>(size_param(req, "round", 0, 0));
      q.page = size_param(req, "page", 1);
      q.page_size = size_param(req, "page_size", 20);
      const auto page = review.list(q);
      json items = json::array();
      for (const auto& item : page.items) items.push_back(item);
      send_json(res, 200,
                json{{"items", items},
                     {"total", page.total},
                     {"page", page.page},
                     {"page_size", page.page_size},
                     {"pages", page.pages},
                     {"counts_by_reason", page.counts_by_reason}});
    }));

    server.Get(R"(/review/item/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto item = review.get(id);
      if (!item) throw HttpError{404, "not_found", "unknown item '" + id + "'"};
      send_json(res, 200, *item);
    }));

    server.Post("/review/verdict", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto verdict = parse_body(req).get<ReviewVerdict>();
      if (verdict.timestamp.empty()) verdict.timestamp = utc_timestamp();
      const auto outcome = review.commit(verdict);
      switch (outcome.status) {
        case CommitStatus::committed:
          send_json(res, 200, json{{"status", "resolved"}, {"item", *review.get(verdict.sample_id)}});
          return;
        case CommitStatus::conflict: throw HttpError{409, "conflict", outcome.message};
        case CommitStatus::not_found: throw HttpError{404, "not_found", outcome.message};
        case CommitStatus::invalid: throw HttpError{422, "validation_error", outcome.message};
      }
    }));

    server.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::vector<DialogueTranscript> transcripts;
      std::vector<GenerationRecord> records;
      {
        std::lock_guard lock(sessions_mu);
        for (const auto& [_, live] : sessions) {
          std::lock_guard session_lock(live->mu);
          transcripts.push_back(live->state.transcript);
          records.insert(records.end(), live->records.begin(), live->records.end());
        }
      }
      auto j = to_json(session_metrics(transcripts, records, *graph));
      j["sessions"] = transcripts.size();
      j["review"] = {{"items", review.size()}, {"pending", review.pending()}};
      send_json(res, 200, j);
    }));

    if (config.static_dir && !server.set_mount_point("/", config.static_dir->string()))
      throw std::invalid_argument("static_dir does not exist: " + config.static_dir->string());
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::bind() {
  if (impl_->config.port == 0)
    impl_->port = impl_->server.bind_to_any_port(impl_->config.host);
  else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port))
    impl_->port = impl_->config.port;
  if (impl_->port <= 0)
    throw std::runtime_error("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  return impl_->port;
}

void Service::run() {
  if (impl_->port <= 0) throw std::logic_error("Service::run before bind");
  spdlog::info("serving on {}:{}", impl_->config.host, impl_->port);
  impl_->server.listen_after_bind();
}

int Service::start_background() {
  const int port = bind();
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

ReviewStore& Service::review() { return impl_->review; }

const FsmGraph& Service::graph() const { return *impl_->graph; }

}  // namespace ivrkit
