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

#include "ivrkit/records.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ivrkit {

using json = nlohmann::json;

std::string_view to_string(CallStatus s) {
  switch (s) {
    case CallStatus::ok: return "ok";
    case CallStatus::timeout: return "timeout";
    case CallStatus::transport_error: return "transport_error";
    case CallStatus::malformed: return "malformed";
  }
  return "ok";
}

CallStatus call_status_from_string(std::string_view s) {
  if (s == "ok") return CallStatus::ok;
  if (s == "timeout") return CallStatus::timeout;
  if (s == "transport_error") return CallStatus::transport_error;
  if (s == "malformed") return CallStatus::malformed;
  throw std::invalid_argument("unknown call status '" + std::string(s) + "'");
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::emit: return "emit";
    case ActionKind::repeat_last_valid: return "repeat_last_valid";
    case ActionKind::reissue_original: return "reissue_original";
  }
  return "emit";
}

ActionKind action_kind_from_string(std::string_view s) {
  if (s == "emit") return ActionKind::emit;
  if (s == "repeat_last_valid") return ActionKind::repeat_last_valid;
  if (s == "reissue_original") return ActionKind::reissue_original;
  throw std::invalid_argument("unknown action kind '" + std::string(s) + "'");
}

std::string_view to_string(JudgeLabel l) {
  switch (l) {
    case JudgeLabel::correct: return "correct";
    case JudgeLabel::incorrect: return "incorrect";
    case JudgeLabel::uncertain: return "uncertain";
  }
  return "uncertain";
}

JudgeLabel judge_label_from_string(std::string_view s) {
  if (s == "correct") return JudgeLabel::correct;
  if (s == "incorrect") return JudgeLabel::incorrect;
  if (s == "uncertain") return JudgeLabel::uncertain;
  throw std::invalid_argument("unknown judge label '" + std::string(s) + "'");
}

bool query_succeeded(const TranscriptTurn& turn) {
  return turn.action_kind == ActionKind::emit && turn.taken_transition &&
         turn.ground_truth_transition && *turn.taken_transition == *turn.ground_truth_transition;
}

namespace {

json label_json(const std::optional<char>& label) {
  return label ? json(std::string(1, *label)) : json(nullptr);
}

std::optional<char> label_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw std::invalid_argument("label must be a single letter");
  return s[0];
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void to_json(json& j, const OptionSet& s) {
  j = json{{"state", s.state.str()}, {"options", json::array()}};
  for (const auto& o : s.options)
    j["options"].push_back({{"label", std::string(1, o.label)},
                            {"text", o.agent_query_text},
                            {"target", o.target_state.str()},
                            {"transition", o.transition_index}});
}

void from_json(const json& j, OptionSet& s) {
  s.state = StateId(j.at("state").get<std::string>());
  s.options.clear();
  for (const auto& o : j.at("options"))
    s.options.push_back({o.at("label").get<std::string>().at(0), o.at("text").get<std::string>(),
                         StateId(o.at("target").get<std::string>()),
                         o.at("transition").get<std::size_t>()});
}

void to_json(json& j, const GenerationRecord& r) {
  j = json{{"sample_id", r.sample_id},
           {"round", r.round},
           {"state", r.state.str()},
           {"options", r.options},
           {"prompt", r.prompt_text},
           {"raw_output", r.raw_output},
           {"cot", r.parsed_cot},
           {"label", label_json(r.parsed_label)},
           {"valid", r.valid},
           {"call_status", to_string(r.call_status)},
           {"user_reply", r.user_reply},
           {"gold_label", label_json(r.gold_label)}};
}

void from_json(const json& j, GenerationRecord& r) {
  r.sample_id = j.value("sample_id", "");
  r.round = j.value("round", 0);
  r.state = StateId(j.at("state").get<std::string>());
  r.options = j.at("options").get<OptionSet>();
  r.prompt_text = j.at("prompt").get<std::string>();
  r.raw_output = j.value("raw_output", "");
  r.parsed_cot = j.value("cot", "");
  r.parsed_label = label_from(j.value("label", json(nullptr)));
  r.valid = j.value("valid", false);
  r.call_status = call_status_from_string(j.value("call_status", "ok"));
  r.user_reply = j.value("user_reply", "");
  r.gold_label = label_from(j.value("gold_label", json(nullptr)));
}

void to_json(json& j, const TranscriptTurn& t) {
  j = json{{"state", t.state.str()},
           {"agent_query", t.agent_query},
           {"user_reply", t.user_reply},
           {"action_kind", to_string(t.action_kind)},
           {"emitted_query", t.emitted_query},
           {"next_state", t.next_state.str()},
           {"retry_count", t.retry_count},
           {"latency_ms", t.latency_ms},
           {"backend_ms", t.backend_ms},
           {"ground_truth_transition", optional_json(t.ground_truth_transition)},
           {"taken_transition", optional_json(t.taken_transition)}};
}

void from_json(const json& j, TranscriptTurn& t) {
  t.state = StateId(j.at("state").get<std::string>());
  t.agent_query = j.at("agent_query").get<std::string>();
  t.user_reply = j.at("user_reply").get<std::string>();
  t.action_kind = action_kind_from_string(j.at("action_kind").get<std::string>());
  t.emitted_query = j.value("emitted_query", "");
  t.next_state = StateId(j.value("next_state", ""));
  t.retry_count = j.value("retry_count", 0);
  t.latency_ms = j.value("latency_ms", 0.0);
  t.backend_ms = j.value("backend_ms", 0.0);
  const auto gt = j.value("ground_truth_transition", json(nullptr));
  t.ground_truth_transition =
      gt.is_null() ? std::nullopt : std::optional<std::size_t>(gt.get<std::size_t>());
  const auto tk = j.value("taken_transition", json(nullptr));
  t.taken_transition =
      tk.is_null() ? std::nullopt : std::optional<std::size_t>(tk.get<std::size_t>());
}

void to_json(json& j, const JudgeVerdict& v) {
  j = json{{"label", to_string(v.label)},
           {"rationale", v.rationale},
           {"prompt_version", v.prompt_version}};
}

void from_json(const json& j, JudgeVerdict& v) {
  v.label = judge_label_from_string(j.at("label").get<std::string>());
  v.rationale = j.value("rationale", "");
  v.prompt_version = j.value("prompt_version", "");
}

}  // namespace ivrkit
