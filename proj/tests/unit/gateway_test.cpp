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

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "ivrkit/mock_backend.hpp"
#include "ivrkit/prompt_store.hpp"
#include "ivrkit/remote_backend.hpp"
#include "test_support.hpp"

namespace ivrkit {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

BackendProfile mock_profile(Role role, json mock, std::uint64_t seed = 0) {
  BackendProfile p;
  p.role = role;
  p.kind = BackendKind::mock;
  p.identifier = "test";
  p.deadline = Millis(1000);
  p.seed = seed;
  p.mock = std::move(mock);
  return p;
}

class HungBackend : public Backend {
 public:
  explicit HungBackend(Millis hang) : hang_(hang) {}
  std::string complete(const Request&) override {
    std::this_thread::sleep_for(hang_);
    return "too late B";
  }

 private:
  Millis hang_;
};

/// Minimal HTTP model server for the remote backend.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      auth_ = req.get_header_value("Authorization");
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
      res.set_content(json{{"text", "Reasoning. B"}}.dump(), "application/json");
    });
    server_.Post("/v1/score", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json tokens = json::array();
      for (const auto& t : whitespace_tokens(body.at("target").get<std::string>()))
        tokens.push_back({{"token", t}, {"prob", 0.5}});
      res.set_content(json{{"tokens", tokens}}.dump(), "application/json");
    });
    server_.Post("/v1/judge", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"probability": 0.8})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::string auth() const { return auth_; }
  std::atomic<int> delay_ms{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string auth_;
};

BackendProfile remote_profile(Role role, const std::string& endpoint, Millis deadline) {
  BackendProfile p;
  p.role = role;
  p.kind = BackendKind::remote;
  p.endpoint = endpoint;
  p.deadline = deadline;
  return p;
}

TEST(Gateway, ScriptedPolicyEchoesByState) {
  const auto c = make_client(mock_profile(Role::policy, {{"mode", "script"},
                                                         {"script", {{"s1", "Reasoning...; E"}}}}));
  Request r{"prompt", {}};
  r.hints.state = "s1";
  const auto out = c.complete(r);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out.text, "Reasoning...; E");
}

TEST(Gateway, AdversarialPolicyIsSeededReplay) {
  const auto g = testing::load_graph("poi_verify");
  const json mock{{"mode", "oracle"}, {"invalid_rate", 0.3}};
  auto run = [&](std::uint64_t seed) {
    const auto c = make_client(mock_profile(Role::policy, mock, seed), g);
    std::vector<std::string> outs;
    for (int i = 0; i < 200; ++i) {
      Request r{"p", {}};
      r.hints.state = "s0";
      r.hints.last_user_reply = "Yes.";
      r.hints.sample_id = "x" + std::to_string(i);
      outs.push_back(c.complete(r).text);
    }
    return outs;
  };
  const auto a = run(5);
  EXPECT_EQ(a, run(5));
  EXPECT_NE(a, run(6));
  std::size_t valid = 0;
  for (const auto& text : a) valid += text.ends_with(" E");
  EXPECT_GT(valid, 100u);
  EXPECT_LT(valid, 200u);
}

TEST(Gateway, ConfiguredProbabilitiesEchoed) {
  const auto c = make_client(mock_profile(Role::evaluator, {{"probs", {0.5, 0.5}}}));
  const auto s = c.score_target({"x", {}}, "Because C");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].probability, 0.5);
  EXPECT_EQ(s[1].probability, 0.5);
}

TEST(Gateway, ThreeTokenScoresInOrder) {
  const auto c = make_client(mock_profile(Role::evaluator, {{"probs", {0.8, 0.2, 0.5}}}));
  const auto s = c.score_target({"x", {}}, "one two three");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].token, "one");
  EXPECT_EQ(s[0].probability, 0.8);
  EXPECT_EQ(s[1].token, "two");
  EXPECT_EQ(s[1].probability, 0.2);
  EXPECT_EQ(s[2].token, "three");
  EXPECT_EQ(s[2].probability, 0.5);
}

TEST(Gateway, ZeroProbabilityFloored) {
  const auto c = make_client(mock_profile(Role::evaluator, {{"probs", {0.0, 1.0}}}));
  const auto s = c.score_target({"x", {}}, "a b");
  EXPECT_EQ(s[0].probability, kProbabilityFloor);
}

TEST(Gateway, EmptyTargetRejected) {
  const auto c = make_client(mock_profile(Role::evaluator, json::object()));
  try {
    c.score_target({"x", {}}, "");
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_STREQ(e.what(), "empty target");
  }
  EXPECT_THROW(c.score_target({"x", {}}, "   "), GatewayError);
}

TEST(Gateway, LogitsReturnedVerbatim) {
  auto logits = [](json pair) {
    return make_client(mock_profile(Role::evaluator, {{"logits", pair}})).judge_logits({"x", {}});
  };
  EXPECT_EQ(logits({0.0, 0.0}), (std::pair{0.0, 0.0}));
  EXPECT_EQ(logits({0.0, 2.0}), (std::pair{0.0, 2.0}));
}

TEST(Gateway, ProbabilityConvertedToLogit) {
  const auto c = make_client(mock_profile(Role::evaluator, {{"probability", 0.8}}));
  const auto [g0, g1] = c.judge_logits({"x", {}});
  EXPECT_EQ(g0, 0.0);
  EXPECT_NEAR(g1, std::log(4.0), 1e-12);
  // Softmax of the converted logits recovers p.
  EXPECT_NEAR(1.0 / (1.0 + std::exp(g0 - g1)), 0.8, 1e-12);
}

TEST(Gateway, RoleMismatchRejected) {
  const auto policy = make_client(mock_profile(Role::policy, {{"mode", "fixed"}, {"fixed", "A"}}));
  EXPECT_THROW(policy.score_target({"x", {}}, "a"), GatewayError);
  EXPECT_THROW(policy.judge_logits({"x", {}}), GatewayError);
}

TEST(Gateway, JudgeCriterionTriggersIncorrect) {
  auto store = PromptStore::in_memory(default_judge_prompt());
  store.revise({"expresses a wish to hang up"});
  const auto judge = make_client(mock_profile(
      Role::judge, {{"mode", "scripted"},
                    {"criteria_triggers", {{"expresses a wish to hang up", {"hang up"}}}}}));
  GenerationRecord sample;
  sample.parsed_label = 'A';
  RequestHints h;
  h.sample_id = "s";
  h.last_user_reply = "I want to hang up now.";
  h.gold_label = 'A';
  h.chosen_label = 'A';
  const auto v1 = judge.judge_incontext(store, "v1", sample, h);
  EXPECT_EQ(v1.label, JudgeLabel::incorrect);
  EXPECT_EQ(v1.prompt_version, "v1");
  // The baseline prompt lacks the criterion.
  EXPECT_EQ(judge.judge_incontext(store, "v0", sample, h).label, JudgeLabel::correct);
  EXPECT_THROW(judge.judge_incontext(store, "v7", sample, h), std::invalid_argument);
}

TEST(Gateway, AlwaysCorrectJudge) {
  const auto store = PromptStore::in_memory(default_judge_prompt());
  const auto judge = make_client(mock_profile(Role::judge, {{"mode", "always_correct"}}));
  EXPECT_EQ(judge.judge_incontext(store, "v0", {}, {}).label, JudgeLabel::correct);
}

TEST(Gateway, GarbageJudgeTextIsUncertain) {
  const auto store = PromptStore::in_memory(default_judge_prompt());
  const auto judge = make_client(mock_profile(Role::judge, {{"mode", "text"}, {"text", "~~ lorem"}}));
  const auto v = judge.judge_incontext(store, "v0", {}, {});
  EXPECT_EQ(v.label, JudgeLabel::uncertain);
  EXPECT_EQ(v.rationale, "unparseable");
}

TEST(Gateway, JudgeTextParsing) {
  EXPECT_EQ(parse_judge_text("VERDICT: correct\nfine", "v0").label, JudgeLabel::correct);
  EXPECT_EQ(parse_judge_text("verdict: Incorrect - wrong", "v0").label, JudgeLabel::incorrect);
  EXPECT_EQ(parse_judge_text("True", "v0").label, JudgeLabel::correct);
  EXPECT_EQ(parse_judge_text("False", "v0").label, JudgeLabel::incorrect);
  EXPECT_EQ(parse_judge_text("VERDICT: correctish", "v0").label, JudgeLabel::uncertain);
}

TEST(Gateway, HungBackendReturnsWithinGrace) {
  BackendProfile p = mock_profile(Role::policy, json::object());
  p.deadline = Millis(50);
  const Client c(p, std::make_shared<HungBackend>(Millis(400)));
  const auto start = Clock::now();
  const auto out = c.complete({"x", {}});
  const auto elapsed = std::chrono::duration_cast<Millis>(Clock::now() - start);
  EXPECT_EQ(out.status, CallStatus::timeout);
  EXPECT_LE(elapsed, p.deadline + kDeadlineGrace);
}

TEST(Gateway, RemoteDeadlineBreachIsTimeout) {
  StubServer stub;
  stub.delay_ms = 200;
  const Client c(remote_profile(Role::policy, stub.endpoint(), Millis(1)),
                 std::make_shared<RemoteBackend>(remote_profile(Role::policy, stub.endpoint(), Millis(1))));
  const auto start = Clock::now();
  const auto out = c.complete({"x", {}});
  EXPECT_EQ(out.status, CallStatus::timeout);
  EXPECT_LE(Clock::now() - start, Millis(1) + kDeadlineGrace);
}

TEST(Gateway, RemoteRoundTripsAndSendsBearer) {
  StubServer stub;
  ::setenv("IVRKIT_BACKEND_TOKEN", "opaque-test-token", 1);
  const auto policy = make_client(remote_profile(Role::policy, stub.endpoint(), Millis(2000)));
  const auto out = policy.complete({"x", {}});
  ::unsetenv("IVRKIT_BACKEND_TOKEN");
  ASSERT_TRUE(out.ok()) << out.error;
  EXPECT_EQ(out.text, "Reasoning. B");
  EXPECT_EQ(stub.auth(), "Bearer opaque-test-token");

  const auto eval = make_client(remote_profile(Role::evaluator, stub.endpoint(), Millis(2000)));
  const auto scores = eval.score_target({"x", {}}, "Reasoning. B");
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[1].token, "B");
  const auto [g0, g1] = eval.judge_logits({"x", {}});
  EXPECT_EQ(g0, 0.0);
  EXPECT_NEAR(g1, std::log(0.8 / 0.2), 1e-12);
}

TEST(Gateway, UnreachableRemoteIsTransportError) {
  const auto c = make_client(remote_profile(Role::policy, "http://127.0.0.1:1", Millis(200)));
  EXPECT_EQ(c.complete({"x", {}}).status, CallStatus::transport_error);
}

TEST(Gateway, ProfileParsing) {
  const auto p = profile_from_json(json::parse(
      R"({"role": "evaluator", "kind": "remote", "endpoint": "http://h:1", "deadline_ms": 900})"));
  EXPECT_EQ(p.role, Role::evaluator);
  EXPECT_EQ(p.kind, BackendKind::remote);
  EXPECT_EQ(p.deadline, Millis(900));
  EXPECT_EQ(p.credential_env, "IVRKIT_BACKEND_TOKEN");
  EXPECT_THROW(profile_from_json(json::parse(R"({"role": "judge", "kind": "remote"})")),
               std::invalid_argument);
  EXPECT_THROW(profile_from_json(json::parse(R"({"role": "oracle"})")), std::invalid_argument);
}

TEST(Gateway, RoundScheduleRepeatsLastEntry) {
  const RoundSchedule s({0.15, 0.08, 0.04});
  EXPECT_EQ(s.at(0), 0.15);
  EXPECT_EQ(s.at(2), 0.04);
  EXPECT_EQ(s.at(9), 0.04);
  EXPECT_EQ(RoundSchedule::from_json(0.3, 0.0).at(4), 0.3);
}

TEST(Gateway, ClassifyReplyFindsTransition) {
  const auto g = testing::load_graph("poi_verify");
  const auto opts = candidate_options(*g, StateId("s0"));
  EXPECT_EQ(opts.label_for_transition(classify_reply(*g, StateId("s0"), "Yes.")), 'E');
}

}  // namespace
}  // namespace ivrkit
