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

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ivrkit/fsm.hpp"
#include "ivrkit/gateway.hpp"
#include "ivrkit/prompt.hpp"
#include "ivrkit/records.hpp"

namespace ivrkit {

inline constexpr int kMaxRetries = 3;
inline constexpr std::size_t kDefaultTurnBudget = 12;

enum class SessionStatus { active, completed, abandoned };
std::string_view to_string(SessionStatus s);

struct AcquiredAttribute {
  std::string reply_class;
  std::string utterance;
};

/// Mutable per-call dialogue state. Owned by one executor at a time; the
/// graph is shared read-only.
struct SessionState {
  std::shared_ptr<const FsmGraph> graph;
  std::string session_id;
  StateId current_state;
  // Truncated history C = (u_1, s_1, ..., u_m, s_m) as (query, reply) pairs.
  std::vector<std::pair<std::string, std::string>> history;
  // Query the owner is currently answering.
  std::string pending_query;
  int retry_count = 0;
  std::optional<std::string> last_valid_query;
  std::map<std::string, AcquiredAttribute> acquired_attributes;
  std::size_t turn_budget = kDefaultTurnBudget;
  std::size_t turns_taken = 0;
  SessionStatus status = SessionStatus::active;
  DialogueTranscript transcript;

  const std::string& original_question() const { return graph->state(current_state).query; }
  bool terminal() const { return graph->is_terminal(current_state); }
};

/// Opens a call at the initial state; the agent's opener is the initial
/// state's query.
SessionState start_session(std::shared_ptr<const FsmGraph> graph,
                           std::size_t turn_budget = kDefaultTurnBudget,
                           std::string session_id = {});

class SessionClosed : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string build_prompt(const SessionState& session, const OptionSet& options,
                         std::string_view template_version = kTemplateV1);

struct ParsedOutput {
  std::string cot;
  std::optional<char> label;
};

/// Label = last standalone capital letter token; cot = trimmed text before it.
ParsedOutput parse_output(std::string_view raw);

/// Fallback policy. Total: every record maps to an action, and the session's
/// retry counter and last valid query are updated.
AgentAction validate_and_fallback(const GenerationRecord& record, SessionState& session);

struct UserReply {
  std::string utterance;
  std::optional<std::size_t> ground_truth_transition;
};

/// Plays the owner side of a call.
class UserAgent {
 public:
  virtual ~UserAgent() = default;
  virtual UserReply respond(const FsmGraph& graph, const StateId& state,
                            std::string_view agent_query) = 0;
};

struct StepContext {
  std::string template_version = std::string(kTemplateV1);
  int round = 0;
  std::size_t sample_index = 0;
};

struct StepResult {
  AgentAction action;
  GenerationRecord record;
  TranscriptTurn turn;
};

/// One owner reply in, one agent action out. Throws SessionClosed when the
/// session is terminal or its budget is spent (marking it abandoned).
StepResult step(SessionState& session, const Client& policy, const UserReply& reply,
                const StepContext& ctx = {});

struct SessionResult {
  DialogueTranscript transcript;
  std::vector<GenerationRecord> records;
  SessionStatus outcome = SessionStatus::abandoned;
  std::map<std::string, AcquiredAttribute> acquired_attributes;
};

SessionResult run_session(std::shared_ptr<const FsmGraph> graph, const Client& policy,
                          UserAgent& user, std::size_t budget, StepContext ctx = {},
                          std::string session_id = {});

/// Queries the agent may legally speak while in `state`: its options, its
/// original question, and the options that lead into it (repeat targets).
bool is_permitted_query(const FsmGraph& graph, const StateId& state, std::string_view query);

}  // namespace ivrkit
