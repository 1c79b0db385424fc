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

#include "ivrkit/evaluator.hpp"

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ivrkit/prompt.hpp"
#include "ivrkit/prompt_store.hpp"
#include "test_support.hpp"

namespace ivrkit {
namespace {

using nlohmann::json;

std::vector<TokenScore> tokens(std::initializer_list<double> ps) {
  std::vector<TokenScore> out;
  for (double p : ps) out.push_back({"t", p});
  return out;
}

TEST(Evaluator, ConstantSequenceReturnsConstant) {
  EXPECT_DOUBLE_EQ(generative_score(tokens({0.5, 0.5})), 0.5);
  for (std::size_t k : {1u, 7u, 64u}) {
    std::vector<TokenScore> ones(k, {"t", 1.0});
    EXPECT_EQ(generative_score(ones), 1.0);
  }
}

TEST(Evaluator, GeometricMeanOfThree) {
  EXPECT_NEAR(generative_score(tokens({0.8, 0.2, 0.5})), std::cbrt(0.08), 1e-9);
  EXPECT_THROW(generative_score({}), std::invalid_argument);
}

TEST(Evaluator, LongSequenceDoesNotUnderflow) {
  std::vector<TokenScore> tiny(2000, {"t", 1e-6});
  EXPECT_NEAR(generative_score(tiny), 1e-6, 1e-15);
}

TEST(Evaluator, SoftmaxExamples) {
  EXPECT_EQ(discriminative_score(0, 0), 0.5);
  EXPECT_NEAR(discriminative_score(0, 2), std::exp(2.0) / (1 + std::exp(2.0)), 1e-15);
  EXPECT_NEAR(discriminative_score(1000, 1002), discriminative_score(0, 2), 1e-15);
  EXPECT_NEAR(discriminative_score(-1000, -998), discriminative_score(0, 2), 1e-15);
  EXPECT_TRUE(std::isfinite(discriminative_score(0, 1e6)));
}

TEST(Evaluator, CombinedConfidence) {
  EXPECT_NEAR(combined_confidence(0.6, 0.9, 0.1), 0.63, 1e-15);
  EXPECT_EQ(combined_confidence(0.6, 0.9, 0.0), 0.6);
  EXPECT_EQ(combined_confidence(0.6, 0.9, 1.0), 0.9);
  EXPECT_EQ(kDefaultAlpha, 0.1);
  EXPECT_THROW(combined_confidence(0.5, 0.5, 1.5), std::invalid_argument);
}

TEST(Evaluator, ThresholdValidation) {
  EXPECT_NO_THROW((Thresholds{0.9, 0.3}.validate()));
  EXPECT_THROW((Thresholds{0.3, 0.9}.validate()), std::invalid_argument);
  EXPECT_THROW((Thresholds{1.2, 0.3}.validate()), std::invalid_argument);
}

TEST(Evaluator, RoutingExamples) {
  const Thresholds t;
  EXPECT_EQ(vote_and_route(0.95, JudgeLabel::correct, t),
            (RoutingDecision{RoutingKind::auto_accept, RoutingReason::high_agree}));
  EXPECT_EQ(vote_and_route(0.95, JudgeLabel::incorrect, t),
            (RoutingDecision{RoutingKind::human_review, RoutingReason::evaluator_disagreement}));
  EXPECT_EQ(vote_and_route(0.99, JudgeLabel::incorrect, t),
            (RoutingDecision{RoutingKind::human_review, RoutingReason::evaluator_disagreement}));
  for (double c : {0.0, 0.3, 0.5, 0.9, 1.0})
    EXPECT_EQ(vote_and_route(c, JudgeLabel::uncertain, t),
              (RoutingDecision{RoutingKind::human_review, RoutingReason::judge_uncertain}));
}

TEST(Evaluator, RoutingBandEdges) {
  const Thresholds t;
  EXPECT_EQ(vote_and_route(0.9, JudgeLabel::correct, t).kind, RoutingKind::auto_accept);
  EXPECT_EQ(vote_and_route(0.3, JudgeLabel::incorrect, t).kind, RoutingKind::auto_reject);
  EXPECT_EQ(vote_and_route(0.3, JudgeLabel::correct, t).reason, RoutingReason::evaluator_disagreement);
  EXPECT_EQ(vote_and_route(0.8999, JudgeLabel::correct, t).reason, RoutingReason::uncertainty_band);
  EXPECT_EQ(vote_and_route(0.3001, JudgeLabel::incorrect, t).reason, RoutingReason::uncertainty_band);
}

TEST(Evaluator, ScoreJumpDivertsAutoDecisions) {
  const Thresholds t;
  EXPECT_EQ(vote_and_route(0.95, JudgeLabel::correct, t, 0.7),
            (RoutingDecision{RoutingKind::human_review, RoutingReason::score_jump}));
  EXPECT_EQ(vote_and_route(0.95, JudgeLabel::correct, t, 0.85).kind, RoutingKind::auto_accept);
  EXPECT_EQ(vote_and_route(0.1, JudgeLabel::incorrect, t, 0.05).kind, RoutingKind::auto_reject);
}

TEST(Evaluator, EvaluationErrorRate) {
  const RoutingDecision acc{RoutingKind::auto_accept, RoutingReason::high_agree};
  const RoutingDecision rej{RoutingKind::auto_reject, RoutingReason::low_agree};
  const RoutingDecision hum{RoutingKind::human_review, RoutingReason::uncertainty_band};
  std::vector<RoutingDecision> d;
  std::vector<GoldDecision> gold;
  for (int i = 0; i < 10; ++i) {
    d.push_back(i < 6 ? acc : rej);
    // Two auto decisions contradict gold.
    const bool wrong = i == 0 || i == 9;
    const auto right = i < 6 ? GoldDecision::accept : GoldDecision::reject;
    gold.push_back(wrong ? (right == GoldDecision::accept ? GoldDecision::reject : GoldDecision::accept)
                         : right);
  }
  for (int i = 0; i < 5; ++i) {
    d.push_back(hum);
    gold.push_back(GoldDecision::reject);
  }
  EXPECT_DOUBLE_EQ(*evaluation_error_rate(d, gold), 0.2);

  const std::vector<RoutingDecision> all_acc(4, acc);
  const std::vector<GoldDecision> all_gold(4, GoldDecision::accept);
  EXPECT_EQ(*evaluation_error_rate(all_acc, all_gold), 0.0);

  const std::vector<RoutingDecision> only_human(3, hum);
  const std::vector<GoldDecision> g3(3, GoldDecision::accept);
  EXPECT_FALSE(evaluation_error_rate(only_human, g3));
}

GenerationRecord valid_record(const FsmGraph& g, const char* state, char label, const char* id) {
  GenerationRecord r;
  r.sample_id = id;
  r.state = StateId(state);
  r.options = candidate_options(g, r.state);
  r.parsed_label = label;
  r.valid = r.options.contains(label);
  r.parsed_cot = render_cot(g, r.options.find(label)->transition_index, kTemplateV1);
  r.prompt_text = "prompt for " + std::string(id);
  return r;
}

TEST(Evaluator, NegativePairUsesAnotherOption) {
  const auto g = testing::load_graph("poi_verify");
  const auto pos = valid_record(*g, "s0", 'E', "x");
  Rng rng(4);
  std::set<char> seen;
  for (int i = 0; i < 200; ++i) {
    const auto pairs = make_eval_pairs(pos, *g, rng);
    ASSERT_TRUE(pairs);
    EXPECT_EQ(pairs->positive.label, 1);
    EXPECT_EQ(pairs->negative.label, 0);
    EXPECT_NE(pairs->negative.output, pairs->positive.output);
    const char neg = pairs->negative.output.back();
    EXPECT_NE(neg, 'E');
    seen.insert(neg);
  }
  EXPECT_EQ(seen, (std::set<char>{'A', 'B', 'C', 'D'}));
}

TEST(Evaluator, SingleOptionStateSkipsPair) {
  const auto g = testing::load_graph("poi_verify");
  const auto pos = valid_record(*g, "new_name", 'A', "y");
  Rng rng(4);
  EXPECT_FALSE(make_eval_pairs(pos, *g, rng));
}

struct EnsembleFixture {
  std::shared_ptr<const FsmGraph> g = testing::load_graph("poi_verify");
  PromptStore store = PromptStore::in_memory(default_judge_prompt());

  Client evaluator(json scripted) const {
    BackendProfile p;
    p.role = Role::evaluator;
    p.mock = {{"scripted", std::move(scripted)}};
    return make_client(p, g);
  }
  Client judge(json mock) const {
    BackendProfile p;
    p.role = Role::judge;
    p.mock = std::move(mock);
    return make_client(p, g);
  }
};

TEST(Evaluator, ConfidentScriptsAutoAccept) {
  EnsembleFixture f;
  const auto ev = f.evaluator(json::object());
  const auto judge = f.judge({{"mode", "scripted"}});
  const Ensemble ens(ev, judge, f.store, f.g, {});
  auto r = valid_record(*f.g, "s0", 'E', "a");
  r.gold_label = 'E';
  const auto rep = ens.evaluate(r, 0);
  EXPECT_NEAR(rep.p_gen, 0.95, 1e-12);
  EXPECT_NEAR(rep.p_disc, discriminative_score(0, 4), 1e-12);
  EXPECT_NEAR(rep.c, 0.9 * 0.95 + 0.1 * discriminative_score(0, 4), 1e-12);
  EXPECT_EQ(rep.routing.kind, RoutingKind::auto_accept);
  EXPECT_EQ(rep.judge.prompt_version, "v0");

  r.gold_label = 'A';
  const auto wrong = ens.evaluate(r, 1);
  EXPECT_EQ(wrong.routing.kind, RoutingKind::auto_reject);
}

TEST(Evaluator, ScriptedDisagreementRoutesTenPercent) {
  EnsembleFixture f;
  const auto ev = f.evaluator({{"flip_every", 10}});
  const auto judge = f.judge({{"mode", "scripted"}});
  const Ensemble ens(ev, judge, f.store, f.g, {});
  std::size_t human = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    auto r = valid_record(*f.g, "s0", 'E', ("s" + std::to_string(i)).c_str());
    r.gold_label = 'E';
    const auto rep = ens.evaluate(r, i);
    if (rep.routing.kind == RoutingKind::human_review) {
      ++human;
      EXPECT_EQ(rep.routing.reason, RoutingReason::evaluator_disagreement);
      EXPECT_EQ((i + 1) % 10, 0u);
    }
  }
  EXPECT_EQ(human, 10u);
}

TEST(Evaluator, LabelOnlyScoringUsesOneToken) {
  EnsembleFixture f;
  BackendProfile p;
  p.role = Role::evaluator;
  p.score_label_only = true;
  p.mock = {{"probs", {0.7}}, {"logits", {0.0, 0.0}}};
  const auto ev = make_client(p, f.g);
  const auto judge = f.judge({{"mode", "always_correct"}});
  const Ensemble ens(ev, judge, f.store, f.g, {});
  const auto rep = ens.evaluate(valid_record(*f.g, "s0", 'E', "z"), 0);
  EXPECT_NEAR(rep.p_gen, 0.7, 1e-12);
  EXPECT_NEAR(rep.c, 0.9 * 0.7 + 0.1 * 0.5, 1e-12);
}

TEST(Evaluator, ReportJsonRoundTrip) {
  ConfidenceReport r;
  r.sample_id = "q";
  r.p_gen = 0.4;
  r.p_disc = 0.7;
  r.c = 0.43;
  r.judge = {JudgeLabel::incorrect, "why", "v2"};
  r.routing = {RoutingKind::human_review, RoutingReason::score_jump};
  r.previous_c = 0.2;
  json j = r;
  const auto back = j.get<ConfidenceReport>();
  EXPECT_EQ(back.sample_id, "q");
  EXPECT_EQ(back.c, 0.43);
  EXPECT_EQ(back.routing, r.routing);
  EXPECT_EQ(back.judge.prompt_version, "v2");
  EXPECT_EQ(back.previous_c, 0.2);
}

}  // namespace
}  // namespace ivrkit
