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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/records.hpp"

namespace ivrkit {

class PromptStore;

enum class Role { policy, evaluator, judge };
enum class BackendKind { mock, remote };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

using Millis = std::chrono::milliseconds;

/// Upper bound on how long a call may run past its deadline before the
/// caller regains control.
inline constexpr Millis kDeadlineGrace{20};
inline constexpr Millis kDefaultPolicyDeadline{200};

struct BackendProfile {
  Role role = Role::policy;
  BackendKind kind = BackendKind::mock;
  std::string identifier;  // doubles as the policy id when role == policy
  Millis deadline = kDefaultPolicyDeadline;
  std::string endpoint;  // remote: "http://host:port"
  std::string credential_env = "IVRKIT_BACKEND_TOKEN";
  std::uint64_t seed = 0;
  nlohmann::json mock;  // mock behaviour, see MockBackend
  // When true the evaluator scores only the option letter instead of the
  // full reasoning-plus-letter output.
  bool score_label_only = false;
};

/// Parses a backend profile; `script` paths resolve against `base_dir`.
BackendProfile profile_from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
nlohmann::json profile_to_json(const BackendProfile& p);

/// Side-channel context passed to backends. Remote backends ignore it; mock
/// backends use it to script behaviour per state or per sample.
struct RequestHints {
  std::string state;
  std::string last_user_reply;
  std::string sample_id;
  std::size_t sample_index = 0;
  int round = 0;
  std::optional<char> gold_label;
  std::optional<char> chosen_label;
  bool chosen_ends_call = false;
};

struct Request {
  std::string prompt;
  RequestHints hints;
};

struct Completion {
  CallStatus status = CallStatus::ok;
  std::string text;
  std::string error;
  double elapsed_ms = 0.0;

  bool ok() const { return status == CallStatus::ok; }
};

struct JudgeScores {
  std::optional<std::pair<double, double>> logits;
  std::optional<double> probability;  // P(label = 1) when logits are unavailable
};

class GatewayError : public std::runtime_error {
 public:
  enum class Kind { transport, timeout, malformed, unsupported, invalid_request };
  GatewayError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A model endpoint. Implementations may block; the Client enforces deadlines.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const Request& request) = 0;
  virtual std::vector<TokenScore> score(const Request& request, std::string_view target);
  virtual JudgeScores judge(const Request& request);
  /// False when every call returns promptly; the client then runs it inline.
  virtual bool may_block() const { return true; }
};

/// Role-checked, deadline-enforcing front end over one backend.
class Client {
 public:
  Client(BackendProfile profile, std::shared_ptr<Backend> backend);

  const BackendProfile& profile() const { return profile_; }
  const std::string& identifier() const { return profile_.identifier; }

  /// Never returns later than deadline + kDeadlineGrace.
  Completion complete(const Request& request, std::optional<Millis> deadline_override = {}) const;

  /// One TokenScore per target token, zero probabilities floored to 1e-12.
  std::vector<TokenScore> score_target(const Request& request, std::string_view target) const;

  /// (g0, g1) label logits; a bare probability p maps to (0, ln(p / (1 - p))).
  std::pair<double, double> judge_logits(const Request& request) const;

  /// Black-box verdict using judge prompt `version` from `store`.
  JudgeVerdict judge_incontext(const PromptStore& store, std::string_view version,
                               const GenerationRecord& sample, const RequestHints& hints) const;

 private:
  void require_role(Role role, std::string_view op) const;

  BackendProfile profile_;
  std::shared_ptr<Backend> backend_;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Builds a client from a profile. Mock policies need `graph` to classify
/// owner replies.
Client make_client(const BackendProfile& profile,
                   std::shared_ptr<const FsmGraph> graph = nullptr);

/// Judge-side prompt: prompt-store body, the sample and the answer format.
std::string render_judge_prompt(std::string_view body, const GenerationRecord& sample);

/// Maps judge text to a verdict; anything unrecognised becomes `uncertain`.
JudgeVerdict parse_judge_text(std::string_view text, std::string_view version);

/// Whitespace tokenization used by mock scoring.
std::vector<std::string> whitespace_tokens(std::string_view text);

}  // namespace ivrkit
