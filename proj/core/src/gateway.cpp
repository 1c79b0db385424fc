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

#include "ivrkit/gateway.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <thread>

#include <spdlog/spdlog.h>

#include "ivrkit/mock_backend.hpp"
#include "ivrkit/prompt_store.hpp"
#include "ivrkit/remote_backend.hpp"

namespace ivrkit {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::policy: return "policy";
    case Role::evaluator: return "evaluator";
    case Role::judge: return "judge";
  }
  return "policy";
}

Role role_from_string(std::string_view s) {
  if (s == "policy") return Role::policy;
  if (s == "evaluator") return Role::evaluator;
  if (s == "judge") return Role::judge;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

BackendProfile profile_from_json(const json& j, const std::filesystem::path& base_dir) {
  BackendProfile p;
  p.role = role_from_string(j.at("role").get<std::string>());
  const auto kind = j.value("kind", "mock");
  if (kind == "mock")
    p.kind = BackendKind::mock;
  else if (kind == "remote")
    p.kind = BackendKind::remote;
  else
    throw std::invalid_argument("unknown backend kind '" + kind + "'");
  p.identifier = j.value("identifier", std::string(to_string(p.role)) + "-" + kind);
  const auto default_deadline = p.role == Role::policy ? kDefaultPolicyDeadline.count() : 2000;
  p.deadline = Millis(j.value("deadline_ms", static_cast<long long>(default_deadline)));
  if (p.deadline.count() <= 0) throw std::invalid_argument("deadline_ms must be positive");
  p.endpoint = j.value("endpoint", "");
  p.credential_env = j.value("credential_env", p.credential_env);
  p.seed = j.value("seed", std::uint64_t{0});
  p.score_label_only = j.value("score_label_only", false);
  if (j.contains("mock")) p.mock = j.at("mock");
  if (j.contains("script")) {
    const std::filesystem::path script = j.at("script").get<std::string>();
    std::ifstream in(script.is_absolute() ? script : base_dir / script);
    if (!in) throw std::runtime_error("cannot open mock script " + script.string());
    p.mock = json::parse(in);
  }
  if (p.kind == BackendKind::remote && p.endpoint.empty())
    throw std::invalid_argument("remote backend requires an endpoint");
  return p;
}

json profile_to_json(const BackendProfile& p) {
  json j{{"role", to_string(p.role)},
         {"kind", p.kind == BackendKind::mock ? "mock" : "remote"},
         {"identifier", p.identifier},
         {"deadline_ms", p.deadline.count()},
         {"seed", p.seed}};
  if (!p.endpoint.empty()) j["endpoint"] = p.endpoint;
  if (p.score_label_only) j["score_label_only"] = true;
  if (!p.mock.is_null()) j["mock"] = p.mock;
  return j;
}

std::vector<TokenScore> Backend::score(const Request&, std::string_view) {
  throw GatewayError(GatewayError::Kind::unsupported, "backend lacks scoring capability");
}

JudgeScores Backend::judge(const Request&) {
  throw GatewayError(GatewayError::Kind::unsupported, "backend lacks judging capability");
}

namespace {

double millis_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Runs `fn` on a detached worker and waits at most `deadline`. A worker that
// overruns keeps the backend alive through its own shared_ptr and discards its
// result. Returns nullopt on timeout; exceptions from `fn` are rethrown.
template <class Fn>
auto call_with_deadline(const std::shared_ptr<Backend>& backend, Fn fn, Millis deadline)
    -> std::optional<decltype(fn(*backend))> {
  using Result = decltype(fn(*backend));
  if (!backend->may_block()) return fn(*backend);

  auto promise = std::make_shared<std::promise<Result>>();
  auto future = promise->get_future();
  std::thread([backend, promise, fn = std::move(fn)]() mutable {
    try {
      promise->set_value(fn(*backend));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();
  if (future.wait_for(deadline) != std::future_status::ready) return std::nullopt;
  return future.get();
}

}  // namespace

Client::Client(BackendProfile profile, std::shared_ptr<Backend> backend)
    : profile_(std::move(profile)), backend_(std::move(backend)) {
  if (!backend_) throw std::invalid_argument("Client requires a backend");
  if (profile_.deadline.count() <= 0) throw std::invalid_argument("deadline must be positive");
}

void Client::require_role(Role role, std::string_view op) const {
  if (profile_.role != role)
    throw GatewayError(GatewayError::Kind::invalid_request,
                       std::string(op) + " requires role " + std::string(to_string(role)) +
                           ", profile has role " + std::string(to_string(profile_.role)));
}

Completion Client::complete(const Request& request, std::optional<Millis> deadline_override) const {
  const auto deadline = deadline_override.value_or(profile_.deadline);
  const auto start = Clock::now();
  Completion out;
  try {
    auto text = call_with_deadline(
        backend_, [request](Backend& b) { return b.complete(request); }, deadline);
    if (text) {
      out.text = std::move(*text);
    } else {
      out.status = CallStatus::timeout;
      out.error = "deadline of " + std::to_string(deadline.count()) + " ms exceeded";
    }
  } catch (const GatewayError& e) {
    out.status = e.kind() == GatewayError::Kind::malformed ? CallStatus::malformed
                 : e.kind() == GatewayError::Kind::timeout ? CallStatus::timeout
                                                           : CallStatus::transport_error;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.status = CallStatus::transport_error;
    out.error = e.what();
  }
  out.elapsed_ms = millis_since(start);
  return out;
}

std::vector<TokenScore> Client::score_target(const Request& request,
                                             std::string_view target) const {
  require_role(Role::evaluator, "score_target");
  if (target.empty() || whitespace_tokens(target).empty())
    throw GatewayError(GatewayError::Kind::invalid_request, "empty target");
  auto scores = call_with_deadline(
      backend_,
      [request, target = std::string(target)](Backend& b) { return b.score(request, target); },
      profile_.deadline);
  if (!scores) throw GatewayError(GatewayError::Kind::timeout, "score_target deadline exceeded");
  if (scores->empty()) throw GatewayError(GatewayError::Kind::malformed, "no token scores returned");
  for (auto& s : *scores) {
    if (!std::isfinite(s.probability) || s.probability < 0.0 || s.probability > 1.0)
      throw GatewayError(GatewayError::Kind::malformed,
                         "token probability outside [0, 1] for '" + s.token + "'");
    if (s.probability == 0.0) {
      spdlog::warn("backend {} reported probability 0 for token '{}'; flooring to {}",
                   profile_.identifier, s.token, kProbabilityFloor);
      s.probability = kProbabilityFloor;
    }
  }
  return std::move(*scores);
}

std::pair<double, double> Client::judge_logits(const Request& request) const {
  require_role(Role::evaluator, "judge_logits");
  auto scores = call_with_deadline(
      backend_, [request](Backend& b) { return b.judge(request); }, profile_.deadline);
  if (!scores) throw GatewayError(GatewayError::Kind::timeout, "judge_logits deadline exceeded");
  std::pair<double, double> logits;
  if (scores->logits) {
    logits = *scores->logits;
  } else if (scores->probability) {
    const double p = *scores->probability;
    logits = {0.0, std::log(p / (1.0 - p))};
  } else {
    throw GatewayError(GatewayError::Kind::malformed, "judge response has neither logits nor probability");
  }
  if (!std::isfinite(logits.first) || !std::isfinite(logits.second))
    throw GatewayError(GatewayError::Kind::malformed, "non-finite judge logits");
  return logits;
}

std::string render_judge_prompt(std::string_view body, const GenerationRecord& sample) {
  std::string out(body);
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "[Sample]\n";
  out += sample.prompt_text;
  out += "[Agent choice] ";
  if (sample.parsed_label) {
    out += *sample.parsed_label;
    if (const auto* o = sample.options.find(*sample.parsed_label)) {
      out += ". ";
      out += o->agent_query_text;
    }
  } else {
    out += "(none)";
  }
  out += "\n[Agent reasoning] ";
  out += sample.parsed_cot;
  out += "\n[Answer] Reply with \"VERDICT: correct\", \"VERDICT: incorrect\" or "
         "\"VERDICT: uncertain\", then one line of rationale.\n";
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

JudgeVerdict parse_judge_text(std::string_view text, std::string_view version) {
  JudgeVerdict v{JudgeLabel::uncertain, "unparseable", std::string(version)};
  const auto low = lower(text);
  const auto pos = low.find("verdict:");
  if (pos != std::string::npos) {
    const auto rest = trim(std::string_view(low).substr(pos + 8));
    for (const auto label : {JudgeLabel::incorrect, JudgeLabel::correct, JudgeLabel::uncertain}) {
      const auto name = to_string(label);
      if (rest.starts_with(name) &&
          (rest.size() == name.size() || !std::isalpha(static_cast<unsigned char>(rest[name.size()])))) {
        v.label = label;
        const auto rationale_start = low.find(name, pos) + name.size();
        v.rationale = trim(text.substr(rationale_start));
        if (v.rationale.empty()) v.rationale = "no rationale given";
        return v;
      }
    }
    return v;
  }
  const auto bare = trim(low);
  if (bare == "true") return {JudgeLabel::correct, "True", std::string(version)};
  if (bare == "false") return {JudgeLabel::incorrect, "False", std::string(version)};
  return v;
}

JudgeVerdict Client::judge_incontext(const PromptStore& store, std::string_view version,
                                     const GenerationRecord& sample,
                                     const RequestHints& hints) const {
  require_role(Role::judge, "judge_incontext");
  const auto* prompt = store.find(version);
  if (!prompt) throw std::invalid_argument("unknown judge prompt version '" + std::string(version) + "'");
  const auto reply = complete({render_judge_prompt(prompt->body, sample), hints});
  if (!reply.ok())
    return {JudgeLabel::uncertain, "judge unavailable: " + reply.error, prompt->id};
  return parse_judge_text(reply.text, prompt->id);
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

Client make_client(const BackendProfile& profile, std::shared_ptr<const FsmGraph> graph) {
  if (profile.kind == BackendKind::remote)
    return Client(profile, std::make_shared<RemoteBackend>(profile));
  return Client(profile, std::make_shared<MockBackend>(profile, std::move(graph)));
}

}  // namespace ivrkit
