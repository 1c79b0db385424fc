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

#include "ivrkit/dialogue.hpp"

#include <chrono>

namespace ivrkit {

using Clock = std::chrono::steady_clock;

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::completed: return "completed";
    case SessionStatus::abandoned: return "abandoned";
  }
  return "active";
}

SessionState start_session(std::shared_ptr<const FsmGraph> graph, std::size_t turn_budget,
                           std::string session_id) {
  if (!graph) throw std::invalid_argument("start_session: null graph");
  if (turn_budget == 0) throw std::invalid_argument("start_session: budget must be >= 1");
  SessionState s;
  s.graph = std::move(graph);
  s.session_id = std::move(session_id);
  s.current_state = s.graph->initial();
  s.pending_query = s.graph->state(s.current_state).query;
  s.turn_budget = turn_budget;
  s.transcript.session_id = s.session_id;
  if (s.terminal()) s.status = SessionStatus::completed;
  return s;
}

std::string build_prompt(const SessionState& session, const OptionSet& options,
                         std::string_view template_version) {
  if (options.empty() && !session.terminal())
    throw std::logic_error("no reply options at non-terminal state '" + options.state.str() + "'");
  return render_selection_prompt(session.history, options, template_version);
}

namespace {

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ParsedOutput parse_output(std::string_view raw) {
  for (std::size_t i = raw.size(); i-- > 0;) {
    const char c = raw[i];
    if (c < 'A' || c > 'Z') continue;
    const bool left_ok = i == 0 || !is_word_char(raw[i - 1]);
    const bool right_ok = i + 1 == raw.size() || !is_word_char(raw[i + 1]);
    if (left_ok && right_ok) return {trim(raw.substr(0, i)), c};
  }
  return {trim(raw), std::nullopt};
}

AgentAction validate_and_fallback(const GenerationRecord& record, SessionState& session) {
  if (record.valid && record.parsed_label) {
    if (const auto* option = record.options.find(*record.parsed_label)) {
      session.retry_count = 0;
      session.last_valid_query = option->agent_query_text;
      return {ActionKind::emit, option->agent_query_text, option->label, option->transition_index};
    }
  }
  if (session.retry_count < kMaxRetries) {
    ++session.retry_count;
    if (session.last_valid_query)
      return {ActionKind::repeat_last_valid, *session.last_valid_query, std::nullopt, std::nullopt};
    return {ActionKind::reissue_original, session.original_question(), std::nullopt, std::nullopt};
  }
  session.retry_count = 0;
  return {ActionKind::reissue_original, session.original_question(), std::nullopt, std::nullopt};
}

StepResult step(SessionState& session, const Client& policy, const UserReply& reply,
                const StepContext& ctx) {
  if (session.status != SessionStatus::active || session.terminal())
    throw SessionClosed("session '" + session.session_id + "' is not active");
  if (session.turns_taken >= session.turn_budget) {
    session.status = SessionStatus::abandoned;
    throw SessionClosed("session '" + session.session_id + "' exhausted its turn budget");
  }
  const auto started = Clock::now();
  const auto& graph = *session.graph;
  const auto state = session.current_state;
  const auto options = candidate_options(graph, state);

  session.history.emplace_back(session.pending_query, reply.utterance);

  StepResult out;
  auto& record = out.record;
  record.sample_id = session.session_id + "-t" + std::to_string(session.turns_taken);
  record.round = ctx.round;
  record.state = state;
  record.options = options;
  record.prompt_text = build_prompt(session, options, ctx.template_version);
  record.user_reply = reply.utterance;
  if (reply.ground_truth_transition)
    record.gold_label = options.label_for_transition(*reply.ground_truth_transition);

  RequestHints hints;
  hints.state = state.str();
  hints.last_user_reply = reply.utterance;
  hints.sample_id = record.sample_id;
  hints.sample_index = ctx.sample_index;
  hints.round = ctx.round;
  hints.gold_label = record.gold_label;
  const auto completion = policy.complete({record.prompt_text, std::move(hints)});

  record.call_status = completion.status;
  if (completion.ok()) {
    record.raw_output = completion.text;
    auto parsed = parse_output(completion.text);
    record.parsed_cot = std::move(parsed.cot);
    record.parsed_label = parsed.label;
    record.valid = parsed.label && options.contains(*parsed.label);
  }

  out.action = validate_and_fallback(record, session);

  auto& turn = out.turn;
  turn.state = state;
  turn.agent_query = session.pending_query;
  turn.user_reply = reply.utterance;
  turn.action_kind = out.action.kind;
  turn.emitted_query = out.action.query;
  turn.retry_count = session.retry_count;
  turn.backend_ms = completion.elapsed_ms;
  turn.ground_truth_transition = reply.ground_truth_transition;
  turn.taken_transition = out.action.transition_index;

  if (out.action.kind == ActionKind::emit) {
    const auto& t = graph.transitions()[*out.action.transition_index];
    const auto& goal = graph.state(state).goal;
    if (!goal.empty()) session.acquired_attributes[goal] = {t.reply_class, reply.utterance};
    session.current_state = t.target;
  }
  session.pending_query = out.action.query;
  ++session.turns_taken;
  turn.next_state = session.current_state;

  if (session.terminal())
    session.status = SessionStatus::completed;
  else if (session.turns_taken >= session.turn_budget)
    session.status = SessionStatus::abandoned;

  turn.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  session.transcript.turns.push_back(turn);
  return out;
}

SessionResult run_session(std::shared_ptr<const FsmGraph> graph, const Client& policy,
                          UserAgent& user, std::size_t budget, StepContext ctx,
                          std::string session_id) {
  auto session = start_session(std::move(graph), budget, std::move(session_id));
  SessionResult result;
  while (session.status == SessionStatus::active) {
    const auto reply = user.respond(*session.graph, session.current_state, session.pending_query);
    auto r = step(session, policy, reply, ctx);
    ++ctx.sample_index;
    result.records.push_back(std::move(r.record));
  }
  result.transcript = std::move(session.transcript);
  result.outcome = session.status;
  result.acquired_attributes = std::move(session.acquired_attributes);
  return result;
}

bool is_permitted_query(const FsmGraph& graph, const StateId& state, std::string_view query) {
  if (graph.state(state).query == query) return true;
  for (auto ti : graph.outgoing(state))
    if (graph.option_query(ti) == query) return true;
  const auto transitions = graph.transitions();
  for (std::size_t ti = 0; ti < transitions.size(); ++ti)
    if (transitions[ti].target == state && graph.option_query(ti) == query) return true;
  return false;
}

}  // namespace ivrkit
