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

#include "ivrkit/fsm.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace ivrkit {
namespace {

using nlohmann::json;

json two_cycle_doc() {
  return json::parse(R"({
    "name": "cycle",
    "states": [{"id": "a", "query": "A?", "goal": "name"},
               {"id": "b", "query": "B?"},
               {"id": "end", "query": "Bye."}],
    "initial": "a",
    "terminals": ["end"],
    "transitions": [
      {"source": "a", "target": "b", "reply_class": "more", "reply_variants": ["go on"]},
      {"source": "b", "target": "a", "reply_class": "back", "reply_variants": ["again"]},
      {"source": "a", "target": "end", "reply_class": "stop", "reply_variants": ["stop"]},
      {"source": "b", "target": "end", "reply_class": "done", "reply_variants": ["done"]}
    ]})");
}

bool has_code(const std::vector<Diagnostic>& d, const std::string& code) {
  return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) { return x.code == code; });
}

TEST(Fsm, LoadsFourStateBrandGraph) {
  const auto g = testing::load_graph("name_status_brand");
  EXPECT_EQ(g->states().size(), 4u);
  EXPECT_EQ(g->initial().str(), "s0");
  EXPECT_TRUE(g->is_terminal(StateId("s3")));
  EXPECT_EQ(g->attribute_goals(), (std::vector<std::string>{"name", "business_status", "brand"}));
}

TEST(Fsm, EmptyStatesRejected) {
  auto doc = two_cycle_doc();
  doc["states"] = json::array();
  const auto d = validate_fsm_document(doc);
  ASSERT_TRUE(has_code(d, "no_states"));
  try {
    load_fsm(doc);
    FAIL() << "expected FsmError";
  } catch (const FsmError& e) {
    EXPECT_NE(std::string(e.what()).find("no states"), std::string::npos);
  }
}

TEST(Fsm, UndeclaredTargetNamed) {
  auto doc = two_cycle_doc();
  doc["transitions"][0]["target"] = "s9";
  try {
    load_fsm(doc);
    FAIL() << "expected FsmError";
  } catch (const FsmError& e) {
    EXPECT_NE(std::string(e.what()).find("s9"), std::string::npos);
    EXPECT_TRUE(has_code(e.diagnostics(), "unknown_state"));
  }
}

TEST(Fsm, ReportsEveryViolation) {
  auto doc = two_cycle_doc();
  doc["transitions"][0]["target"] = "s9";
  doc["transitions"][1]["reply_variants"] = json::array();
  const auto d = validate_fsm_document(doc);
  EXPECT_TRUE(has_code(d, "unknown_state"));
  EXPECT_TRUE(has_code(d, "no_variants"));
}

TEST(Fsm, NegativeWeightRejected) {
  auto doc = two_cycle_doc();
  doc["transitions"][0]["reply_variants"] = json::parse(R"([{"text": "x", "weight": -1}])");
  EXPECT_TRUE(has_code(validate_fsm_document(doc), "bad_weight"));
}

TEST(Fsm, SerializeRoundTrips) {
  const auto g = testing::load_graph("poi_verify");
  const auto again = load_fsm(serialize_fsm(*g));
  EXPECT_EQ(serialize_fsm(again), serialize_fsm(*g));
  EXPECT_TRUE(std::equal(g->transitions().begin(), g->transitions().end(),
                         again.transitions().begin(), again.transitions().end()));
}

TEST(Fsm, ThreeOptionsLabelledInOrder) {
  const auto g = testing::load_graph("hours");
  const auto opts = candidate_options(*g, StateId("s1"));
  ASSERT_EQ(opts.size(), 3u);
  EXPECT_EQ(opts.labels(), "ABC");
  EXPECT_EQ(opts.options[0].agent_query_text, "What time do you close?");
  EXPECT_EQ(opts.options[1].agent_query_text, "What time do you open?");
  EXPECT_EQ(opts.options[2].agent_query_text, "What are your business hours?");
}

TEST(Fsm, TerminalHasNoOptions) {
  const auto g = testing::load_graph("name_status_brand");
  EXPECT_TRUE(candidate_options(*g, StateId("s3")).empty());
}

TEST(Fsm, FiveOptionsFollowDeclarationOrder) {
  const auto g = testing::load_graph("poi_verify");
  const auto opts = candidate_options(*g, StateId("s0"));
  ASSERT_EQ(opts.size(), 5u);
  EXPECT_EQ(opts.labels(), "ABCDE");
  // Oracle: walk the transition list directly.
  std::size_t k = 0;
  for (std::size_t i = 0; i < g->transitions().size(); ++i) {
    if (g->transitions()[i].source != StateId("s0")) continue;
    EXPECT_EQ(opts.options[k].transition_index, i);
    EXPECT_EQ(opts.options[k].label, option_label(k));
    EXPECT_EQ(opts.label_for_transition(i), option_label(k));
    ++k;
  }
  EXPECT_TRUE(opts.contains('E'));
  EXPECT_FALSE(opts.contains('F'));
}

TEST(Fsm, OptionQueryUsesOverride) {
  const auto g = testing::load_graph("name_status_brand");
  const auto opts = candidate_options(*g, StateId("s0"));
  EXPECT_EQ(opts.find('A')->agent_query_text, "Are you still operating?");
  EXPECT_EQ(opts.find('B')->agent_query_text, "Sorry to bother you, goodbye.");
}

TEST(Fsm, BrandGraphPathGroups) {
  const auto g = testing::load_graph("name_status_brand");
  const auto groups = enumerate_paths(*g, 10);
  auto ids = [](std::initializer_list<const char*> xs) {
    Path p;
    for (auto x : xs) p.emplace_back(x);
    return p;
  };
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups.at(2), std::vector<Path>{ids({"s0", "s3"})});
  EXPECT_EQ(groups.at(3), std::vector<Path>{ids({"s0", "s1", "s3"})});
  EXPECT_EQ(groups.at(4), std::vector<Path>{ids({"s0", "s1", "s2", "s3"})});
}

TEST(Fsm, InitialTerminalGivesSinglePath) {
  const auto doc = json::parse(R"({
    "states": [{"id": "only", "query": "Bye."}],
    "initial": "only", "terminals": ["only"], "transitions": []})");
  const auto g = load_fsm(doc);
  const auto groups = enumerate_paths(g, 10);
  ASSERT_EQ(groups.size(), 1u);
  ASSERT_EQ(groups.at(1).size(), 1u);
  EXPECT_EQ(groups.at(1)[0], Path{StateId("only")});
}

TEST(Fsm, TwoCycleMatchesDepthCappedSearch) {
  const auto doc = two_cycle_doc();
  const auto g = load_fsm(doc);
  constexpr std::size_t kCap = 6;

  // Oracle: plain DFS over the raw document.
  std::set<std::vector<std::string>> expected;
  std::vector<std::string> stack{"a"};
  std::function<void()> dfs = [&] {
    if (stack.back() == "end") {
      expected.insert(stack);
      return;
    }
    if (stack.size() == kCap) return;
    for (const auto& t : doc["transitions"]) {
      if (t["source"] != stack.back()) continue;
      stack.push_back(t["target"]);
      dfs();
      stack.pop_back();
    }
  };
  dfs();

  std::set<std::vector<std::string>> got;
  std::size_t total = 0;
  for (const auto& [len, paths] : enumerate_paths(g, kCap)) {
    for (const auto& p : paths) {
      EXPECT_EQ(p.size(), len);
      EXPECT_LE(p.size(), kCap);
      std::vector<std::string> s;
      for (const auto& id : p) s.push_back(id.str());
      got.insert(s);
      ++total;
    }
  }
  EXPECT_EQ(got, expected);
  EXPECT_EQ(total, expected.size());
  EXPECT_EQ(expected.size(), 5u);
}

}  // namespace
}  // namespace ivrkit
