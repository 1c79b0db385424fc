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

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ivrkit/prompt.hpp"
#include "ivrkit/prompt_store.hpp"

namespace ivrkit {

using json = nlohmann::json;

void Thresholds::validate() const {
  if (!(0.0 <= t_lo && t_lo < t_hi && t_hi <= 1.0))
    throw std::invalid_argument("thresholds must satisfy 0 <= t_lo < t_hi <= 1");
}

double generative_score(std::span<const TokenScore> token_scores) {
  if (token_scores.empty()) throw std::invalid_argument("generative_score: empty token list");
  double log_sum = 0.0;
  for (const auto& t : token_scores) {
    if (!(t.probability > 0.0 && t.probability <= 1.0))
      throw std::invalid_argument("generative_score: probability outside (0, 1]");
    log_sum += std::log(t.probability);
  }
  return std::exp(log_sum / static_cast<double>(token_scores.size()));
}

double discriminative_score(double g0, double g1) {
  if (!std::isfinite(g0) || !std::isfinite(g1))
    throw std::invalid_argument("discriminative_score: non-finite logit");
  const double m = std::max(g0, g1);
  const double e0 = std::exp(g0 - m);
  const double e1 = std::exp(g1 - m);
  return e1 / (e0 + e1);
}

double combined_confidence(double p_gen, double p_disc, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(p_gen >= 0.0 && p_gen <= 1.0) || !(p_disc >= 0.0 && p_disc <= 1.0))
    throw std::invalid_argument("scores must lie in [0, 1]");
  return (1.0 - alpha) * p_gen + alpha * p_disc;
}

std::string_view to_string(RoutingKind k) {
  switch (k) {
    case RoutingKind::auto_accept: return "auto_accept";
    case RoutingKind::auto_reject: return "auto_reject";
    case RoutingKind::human_review: return "human_review";
  }
  return "human_review";
}

std::string_view to_string(RoutingReason r) {
  switch (r) {
    case RoutingReason::high_agree: return "high_agree";
    case RoutingReason::low_agree: return "low_agree";
    case RoutingReason::evaluator_disagreement: return "evaluator_disagreement";
    case RoutingReason::uncertainty_band: return "uncertainty_band";
    case RoutingReason::judge_uncertain: return "judge_uncertain";
    case RoutingReason::score_jump: return "score_jump";
    case RoutingReason::invalid_output: return "invalid_output";
  }
  return "uncertainty_band";
}

RoutingKind routing_kind_from_string(std::string_view s) {
  for (auto k : {RoutingKind::auto_accept, RoutingKind::auto_reject, RoutingKind::human_review})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown routing kind '" + std::string(s) + "'");
}

RoutingReason routing_reason_from_string(std::string_view s) {
  for (auto r : {RoutingReason::high_agree, RoutingReason::low_agree,
                 RoutingReason::evaluator_disagreement, RoutingReason::uncertainty_band,
                 RoutingReason::judge_uncertain, RoutingReason::score_jump,
                 RoutingReason::invalid_output})
    if (to_string(r) == s) return r;
  throw std::invalid_argument("unknown routing reason '" + std::string(s) + "'");
}

RoutingDecision vote_and_route(double c, JudgeLabel judge, const Thresholds& thresholds,
                               std::optional<double> previous_c, double jump) {
  thresholds.validate();
  using K = RoutingKind;
  using R = RoutingReason;
  if (judge == JudgeLabel::uncertain) return {K::human_review, R::judge_uncertain};

  RoutingDecision d;
  if (c >= thresholds.t_hi)
    d = judge == JudgeLabel::correct ? RoutingDecision{K::auto_accept, R::high_agree}
                                     : RoutingDecision{K::human_review, R::evaluator_disagreement};
  else if (c <= thresholds.t_lo)
    d = judge == JudgeLabel::incorrect ? RoutingDecision{K::auto_reject, R::low_agree}
                                       : RoutingDecision{K::human_review, R::evaluator_disagreement};
  else
    d = {K::human_review, R::uncertainty_band};

  if (d.kind != K::human_review && previous_c && c - *previous_c >= jump)
    d = {K::human_review, R::score_jump};
  return d;
}

void to_json(json& j, const RoutingDecision& r) {
  j = json{{"kind", to_string(r.kind)}, {"reason", to_string(r.reason)}};
}

void from_json(const json& j, RoutingDecision& r) {
  r.kind = routing_kind_from_string(j.at("kind").get<std::string>());
  r.reason = routing_reason_from_string(j.at("reason").get<std::string>());
}

void to_json(json& j, const ConfidenceReport& r) {
  j = json{{"sample_id", r.sample_id}, {"p_gen", r.p_gen},   {"p_disc", r.p_disc},
           {"alpha", r.alpha},         {"c", r.c},           {"judge", r.judge},
           {"routing", r.routing},     {"previous_c", r.previous_c ? json(*r.previous_c) : json()}};
}

void from_json(const json& j, ConfidenceReport& r) {
  r.sample_id = j.value("sample_id", "");
  r.p_gen = j.at("p_gen").get<double>();
  r.p_disc = j.at("p_disc").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.c = j.at("c").get<double>();
  r.judge = j.at("judge").get<JudgeVerdict>();
  r.routing = j.at("routing").get<RoutingDecision>();
  const auto prev = j.value("previous_c", json());
  r.previous_c = prev.is_null() ? std::nullopt : std::optional<double>(prev.get<double>());
}

void to_json(json& j, const EvalPair& p) {
  j = json{{"sample_id", p.sample_id},
           {"prompt", p.prompt},
           {"output", p.output},
           {"label", p.label},
           {"eval_prompt", p.eval_prompt}};
}

std::string sample_output(const GenerationRecord& sample) {
  if (!sample.parsed_label) return sample.parsed_cot;
  return render_output(sample.parsed_cot, *sample.parsed_label);
}

std::optional<EvalPairs> make_eval_pairs(const GenerationRecord& positive, const FsmGraph& graph,
                                         Rng& rng, NegativeStrategy) {
  if (!positive.valid || !positive.parsed_label)
    throw std::invalid_argument("make_eval_pairs: positive sample must be valid");
  const auto& options = positive.options.options;
  if (options.size() < 2) return std::nullopt;

  const auto chosen = static_cast<std::size_t>(*positive.parsed_label - 'A');
  auto pick = rng.uniform_index(options.size() - 1);
  if (pick >= chosen) ++pick;
  const auto& negative_option = options[pick];

  EvalPairs out;
  out.positive.sample_id = positive.sample_id;
  out.positive.prompt = positive.prompt_text;
  out.positive.output = sample_output(positive);
  out.positive.label = 1;
  out.positive.eval_prompt = render_eval_prompt(out.positive.prompt, out.positive.output);

  out.negative.sample_id = positive.sample_id;
  out.negative.prompt = positive.prompt_text;
  out.negative.output = render_output(
      render_cot(graph, negative_option.transition_index, kTemplateV1), negative_option.label);
  out.negative.label = 0;
  out.negative.eval_prompt = render_eval_prompt(out.negative.prompt, out.negative.output);
  return out;
}

std::optional<double> evaluation_error_rate(std::span<const RoutingDecision> decisions,
                                            std::span<const GoldDecision> gold) {
  if (decisions.size() != gold.size())
    throw std::invalid_argument("evaluation_error_rate: length mismatch");
  std::size_t automatic = 0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i].kind == RoutingKind::human_review) continue;
    ++automatic;
    const bool accepted = decisions[i].kind == RoutingKind::auto_accept;
    if (accepted != (gold[i] == GoldDecision::accept)) ++wrong;
  }
  if (automatic == 0) return std::nullopt;
  return static_cast<double>(wrong) / static_cast<double>(automatic);
}

Ensemble::Ensemble(const Client& evaluator, const Client& judge, const PromptStore& prompts,
                   std::shared_ptr<const FsmGraph> graph, EnsembleConfig config)
    : evaluator_(evaluator),
      judge_(judge),
      prompts_(prompts),
      graph_(std::move(graph)),
      config_(std::move(config)) {
  config_.thresholds.validate();
  if (!(config_.alpha >= 0.0 && config_.alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [0, 1]");
}

ConfidenceReport Ensemble::evaluate(const GenerationRecord& sample, std::size_t sample_index,
                                    std::optional<double> previous_c) const {
  if (!sample.valid || !sample.parsed_label)
    throw std::invalid_argument("Ensemble::evaluate: sample is not valid");

  RequestHints hints;
  hints.state = sample.state.str();
  hints.last_user_reply = sample.user_reply;
  hints.sample_id = sample.sample_id;
  hints.sample_index = sample_index;
  hints.round = sample.round;
  hints.gold_label = sample.gold_label;
  hints.chosen_label = sample.parsed_label;
  if (const auto* o = sample.options.find(*sample.parsed_label); o && graph_)
    hints.chosen_ends_call = graph_->is_terminal(o->target_state);

  const auto output = sample_output(sample);
  const std::string target =
      evaluator_.profile().score_label_only ? std::string(1, *sample.parsed_label) : output;

  ConfidenceReport r;
  r.sample_id = sample.sample_id;
  r.alpha = config_.alpha;
  r.previous_c = previous_c;
  r.p_gen = generative_score(evaluator_.score_target({sample.prompt_text, hints}, target));
  const auto [g0, g1] =
      evaluator_.judge_logits({render_eval_prompt(sample.prompt_text, output), hints});
  r.p_disc = discriminative_score(g0, g1);
  r.c = combined_confidence(r.p_gen, r.p_disc, config_.alpha);
  r.judge = judge_.judge_incontext(prompts_, config_.judge_prompt_version, sample, hints);
  r.routing = vote_and_route(r.c, r.judge.label, config_.thresholds, previous_c, config_.score_jump);
  return r;
}

}  // namespace ivrkit
