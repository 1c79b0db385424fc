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

#include <deque>
#include <thread>

#include <gtest/gtest.h>

#include "ivrkit/mock_backend.hpp"
#include "ivrkit/simulator.hpp"
#include "test_support.hpp"

namespace ivrkit {
namespace {

using nlohmann::json;

/// Returns queued outputs in order; an empty entry hangs past the deadline.
class QueueBackend : public Backend {
 public:
  explicit QueueBackend(std::vector<std::string> outputs) : outputs_(outputs.begin(), outputs.end()) {}
  std::string complete(const Request&) override {
    std::string next;
    {
      std::lock_guard lock(mu_);
      if (outputs_.empty()) return "A";
      next = outputs_.front();
      outputs_.pop_front();
    }
    if (next.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return next;
  }

 private:
  std::mutex mu_;
  std::deque<std::string> outputs_;
};

Client queue_client(std::vector<std::string> outputs) {
  BackendProfile p;
  p.identifier = "queue";
  p.deadline = Millis(40);
  return Client(p, std::make_shared<QueueBackend>(std::move(outputs)));
}

Client oracle_client(std::shared_ptr<const FsmGraph> g, json mock = json::object()) {
  BackendProfile p;
  p.identifier = "oracle";
  p.mock = std::move(mock);
  return make_client(p, std::move(g));
}

GenerationRecord record_with(const FsmGraph& g, const char* state, std::optional<char> label) {
  GenerationRecord r;
  r.state = StateId(state);
  r.options = candidate_options(g, r.state);
  r.parsed_label = label;
  r.valid = label && r.options.contains(*label);
  return r;
}

class ScriptedUser : public UserAgent {
 public:
  explicit ScriptedUser(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  UserReply respond(const FsmGraph&, const StateId&, std::string_view) override {
    return {replies_.at(std::min(i_++, replies_.size() - 1)), std::nullopt};
  }

 private:
  std::vector<std::string> replies_;
  std::size_t i_ = 0;
};

TEST(Dialogue, PromptListsOptionsAndInstruction) {
  const auto g = testing::load_graph("poi_verify");
  auto s = start_session(g);
  s.history.emplace_back("Hello, is this ABC Cake Shop?", "Yes.");
  const auto opts = candidate_options(*g, StateId("s0"));
  const auto prompt = build_prompt(s, opts);
  for (char c : std::string("ABCDE")) EXPECT_NE(prompt.find(std::string(1, c) + ". "), std::string::npos);
  EXPECT_NE(prompt.find("[Output]"), std::string::npos);
  EXPECT_NE(prompt.find("User: Yes."), std::string::npos);
  EXPECT_EQ(prompt, build_prompt(s, opts));
}

TEST(Dialogue, EmptyHistoryPromptHasOpenerOnly) {
  const auto g = testing::load_graph("poi_verify");
  const auto s = start_session(g);
  const auto prompt = build_prompt(s, candidate_options(*g, StateId("s0")));
  EXPECT_NE(prompt.find("(call opened, no owner reply yet)"), std::string::npos);
  EXPECT_EQ(prompt.find("User:"), std::string::npos);
  EXPECT_THROW(build_prompt(s, candidate_options(*g, StateId("s0")), "v0"), std::invalid_argument);
}

TEST(Dialogue, ParseTakesLastStandaloneCapital) {
  const auto p = parse_output("User's reply confirmed as ABC cake shop. E");
  EXPECT_EQ(p.label, 'E');
  EXPECT_EQ(p.cot, "User's reply confirmed as ABC cake shop.");
  const auto bare = parse_output("D");
  EXPECT_EQ(bare.label, 'D');
  EXPECT_EQ(bare.cot, "");
  const auto empty = parse_output("");
  EXPECT_FALSE(empty.label);
  EXPECT_EQ(empty.cot, "");
  EXPECT_EQ(parse_output("I think (B).").label, 'B');
  EXPECT_FALSE(parse_output("no letter here, ABC").label);
}

TEST(Dialogue, OutOfSetLabelIsInvalid) {
  const auto g = testing::load_graph("hours");
  const auto r = record_with(*g, "s1", parse_output("D").label);
  EXPECT_FALSE(r.valid);
}

TEST(Dialogue, InvalidWithLastValidRepeats) {
  const auto g = testing::load_graph("hours");
  auto s = start_session(g);
  s.current_state = StateId("s1");
  s.last_valid_query = "Are you open today?";
  const auto a = validate_and_fallback(record_with(*g, "s1", 'D'), s);
  EXPECT_EQ(a.kind, ActionKind::repeat_last_valid);
  EXPECT_EQ(a.query, "Are you open today?");
  EXPECT_EQ(s.retry_count, 1);
}

TEST(Dialogue, FourthConsecutiveInvalidReissues) {
  const auto g = testing::load_graph("hours");
  auto s = start_session(g);
  s.current_state = StateId("s1");
  s.last_valid_query = "Are you open today?";
  for (int i = 1; i <= 3; ++i) {
    EXPECT_EQ(validate_and_fallback(record_with(*g, "s1", 'D'), s).kind, ActionKind::repeat_last_valid);
    EXPECT_EQ(s.retry_count, i);
  }
  const auto a = validate_and_fallback(record_with(*g, "s1", 'D'), s);
  EXPECT_EQ(a.kind, ActionKind::reissue_original);
  EXPECT_EQ(a.query, "Are you open today?");
  EXPECT_EQ(s.retry_count, 0);
  EXPECT_EQ(validate_and_fallback(record_with(*g, "s1", std::nullopt), s).kind,
            ActionKind::repeat_last_valid);
}

TEST(Dialogue, ValidLabelEmitsAndResets) {
  const auto g = testing::load_graph("poi_verify");
  auto s = start_session(g);
  s.retry_count = 2;
  const auto a = validate_and_fallback(record_with(*g, "s0", 'E'), s);
  EXPECT_EQ(a.kind, ActionKind::emit);
  EXPECT_EQ(a.label, 'E');
  EXPECT_EQ(a.query, "This is Baidu Maps. Are you still operating?");
  EXPECT_EQ(s.retry_count, 0);
  EXPECT_EQ(s.last_valid_query, a.query);
}

TEST(Dialogue, NoLastValidReissuesOriginal) {
  const auto g = testing::load_graph("poi_verify");
  auto s = start_session(g);
  const auto a = validate_and_fallback(record_with(*g, "s0", 'Q'), s);
  EXPECT_EQ(a.kind, ActionKind::reissue_original);
  EXPECT_EQ(a.query, "Hello, is this ABC Cake Shop?");
  EXPECT_EQ(s.retry_count, 1);
}

TEST(Dialogue, AffirmMovesToNextState) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = oracle_client(g);
  auto s = start_session(g, 12, "t");
  const auto r = step(s, policy, {"Yes.", std::nullopt});
  EXPECT_EQ(r.action.kind, ActionKind::emit);
  EXPECT_EQ(s.current_state.str(), "s1");
  EXPECT_EQ(r.turn.next_state.str(), "s1");
  EXPECT_EQ(s.pending_query, "Are you still operating?");
  EXPECT_EQ(s.acquired_attributes.at("name").reply_class, "affirm");
}

TEST(Dialogue, TimeoutRepeatsAndKeepsState) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = queue_client({"Confirmed. A", ""});
  auto s = start_session(g, 12, "t");
  step(s, policy, {"Yes.", std::nullopt});
  ASSERT_EQ(s.current_state.str(), "s1");
  const auto r = step(s, policy, {"Yes, we are open.", std::nullopt});
  EXPECT_EQ(r.record.call_status, CallStatus::timeout);
  EXPECT_EQ(r.action.kind, ActionKind::repeat_last_valid);
  EXPECT_EQ(r.action.query, "Are you still operating?");
  EXPECT_EQ(s.current_state.str(), "s1");
}

TEST(Dialogue, TerminalTransitionCompletesSession) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = oracle_client(g);
  ScriptedUser user({"Yes.", "No, we closed down."});
  const auto res = run_session(g, policy, user, 12, {}, "t");
  EXPECT_EQ(res.outcome, SessionStatus::completed);
  ASSERT_EQ(res.transcript.turns.size(), 2u);
  EXPECT_EQ(res.transcript.turns.back().next_state.str(), "s3");
  EXPECT_EQ(res.acquired_attributes.at("business_status").reply_class, "closed");
  EXPECT_EQ(res.acquired_attributes.size(), 2u);
}

TEST(Dialogue, PerfectPolicyAcquiresAllGoals) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = oracle_client(g);
  ScriptedUser user({"Yes.", "Yes, we are open.", "Yes, we are a franchise."});
  const auto res = run_session(g, policy, user, 12);
  EXPECT_EQ(res.outcome, SessionStatus::completed);
  for (const auto& goal : g->attribute_goals()) EXPECT_TRUE(res.acquired_attributes.contains(goal));
}

TEST(Dialogue, BudgetOneAbandons) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = oracle_client(g);
  ScriptedUser user({"Yes.", "Yes, we are open.", "Yes, we are a franchise."});
  const auto res = run_session(g, policy, user, 1);
  EXPECT_EQ(res.outcome, SessionStatus::abandoned);
  EXPECT_EQ(res.transcript.turns.size(), 1u);
}

TEST(Dialogue, ClosedSessionRejectsSteps) {
  const auto g = testing::load_graph("name_status_brand");
  const auto policy = oracle_client(g);
  auto s = start_session(g, 12);
  step(s, policy, {"No, wrong number.", std::nullopt});
  EXPECT_EQ(s.status, SessionStatus::completed);
  EXPECT_THROW(step(s, policy, {"hello?", std::nullopt}), SessionClosed);
}

TEST(Dialogue, AdversarialPolicyNeverHallucinates) {
  const auto g = testing::load_graph("poi_verify");
  const auto policy = oracle_client(g, {{"invalid_rate", 0.3}});
  OwnerProfile profile;
  std::size_t invalid = 0, turns = 0;
  for (int i = 0; i < 200; ++i) {
    SimulatedOwner owner(profile, Rng(i));
    const auto res = run_session(g, policy, owner, 12, {}, "s" + std::to_string(i));
    for (std::size_t k = 0; k < res.transcript.turns.size(); ++k) {
      const auto& t = res.transcript.turns[k];
      ++turns;
      invalid += !res.records[k].valid;
      ASSERT_TRUE(is_permitted_query(*g, t.state, t.emitted_query)) << t.emitted_query;
      ASSERT_LE(t.retry_count, kMaxRetries);
    }
  }
  EXPECT_GT(invalid, turns / 5);
}

}  // namespace
}  // namespace ivrkit
