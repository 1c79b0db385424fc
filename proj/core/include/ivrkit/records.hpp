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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ivrkit/fsm.hpp"

namespace ivrkit {

enum class CallStatus { ok, timeout, transport_error, malformed };

std::string_view to_string(CallStatus s);
CallStatus call_status_from_string(std::string_view s);

/// One policy decision: prompt X, model output Y and its validation against
/// the FSM option set.
struct GenerationRecord {
  std::string sample_id;
  StateId state;
  OptionSet options;
  std::string prompt_text;
  std::string raw_output;
  std::string parsed_cot;
  std::optional<char> parsed_label;
  bool valid = false;  // parsed_label names one of `options`
  CallStatus call_status = CallStatus::ok;
  std::string user_reply;
  // Owner-side ground truth when the reply came from the simulator.
  std::optional<char> gold_label;
  int round = 0;
};

enum class ActionKind { emit, repeat_last_valid, reissue_original };

std::string_view to_string(ActionKind k);
ActionKind action_kind_from_string(std::string_view s);

struct AgentAction {
  ActionKind kind = ActionKind::reissue_original;
  std::string query;
  std::optional<char> label;                    // emit only
  std::optional<std::size_t> transition_index;  // emit only
};

struct TranscriptTurn {
  StateId state;
  std::string agent_query;
  std::string user_reply;
  ActionKind action_kind = ActionKind::emit;
  std::string emitted_query;
  StateId next_state;
  int retry_count = 0;
  double latency_ms = 0.0;
  double backend_ms = 0.0;
  std::optional<std::size_t> ground_truth_transition;
  std::optional<std::size_t> taken_transition;
};

struct DialogueTranscript {
  std::string session_id;
  std::vector<TranscriptTurn> turns;
};

/// True when this turn's query prompt acquired its attribute: the agent
/// emitted a valid option and it matches the owner's actual reply class.
bool query_succeeded(const TranscriptTurn& turn);

enum class JudgeLabel { correct, incorrect, uncertain };

std::string_view to_string(JudgeLabel l);
JudgeLabel judge_label_from_string(std::string_view s);

struct JudgeVerdict {
  JudgeLabel label = JudgeLabel::uncertain;
  std::string rationale;
  std::string prompt_version;
};

struct TokenScore {
  std::string token;
  double probability = 1.0;
};

void to_json(nlohmann::json& j, const OptionSet& s);
void from_json(const nlohmann::json& j, OptionSet& s);
void to_json(nlohmann::json& j, const GenerationRecord& r);
void from_json(const nlohmann::json& j, GenerationRecord& r);
void to_json(nlohmann::json& j, const TranscriptTurn& t);
void from_json(const nlohmann::json& j, TranscriptTurn& t);
void to_json(nlohmann::json& j, const JudgeVerdict& v);
void from_json(const nlohmann::json& j, JudgeVerdict& v);

}  // namespace ivrkit
