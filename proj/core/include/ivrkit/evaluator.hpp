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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "ivrkit/fsm.hpp"
#include "ivrkit/gateway.hpp"
#include "ivrkit/records.hpp"
#include "ivrkit/rng.hpp"

namespace ivrkit {

class PromptStore;

inline constexpr double kDefaultAlpha = 0.1;
inline constexpr double kDefaultScoreJump = 0.15;

struct Thresholds {
  double t_hi = 0.9;
  double t_lo = 0.3;

  /// Throws std::invalid_argument unless 0 <= t_lo < t_hi <= 1.
  void validate() const;
};

/// Length-normalized sequence likelihood (geometric mean of token
/// probabilities), computed in the log domain.
double generative_score(std::span<const TokenScore> token_scores);

/// Two-way softmax probability of label 1.
double discriminative_score(double g0, double g1);

/// (1 - alpha) * p_gen + alpha * p_disc.
double combined_confidence(double p_gen, double p_disc, double alpha = kDefaultAlpha);

enum class RoutingKind { auto_accept, auto_reject, human_review };
enum class RoutingReason {
  high_agree,
  low_agree,
  evaluator_disagreement,
  uncertainty_band,
  judge_uncertain,
  score_jump,
  invalid_output,
};

std::string_view to_string(RoutingKind k);
std::string_view to_string(RoutingReason r);
RoutingKind routing_kind_from_string(std::string_view s);
RoutingReason routing_reason_from_string(std::string_view s);

struct RoutingDecision {
  RoutingKind kind = RoutingKind::human_review;
  RoutingReason reason = RoutingReason::uncertainty_band;
  friend bool operator==(const RoutingDecision&, const RoutingDecision&) = default;
};

/// Vote between the evaluator's confidence band and the judge's label.
///
///   judge      | c >= t_hi                  | t_lo < c < t_hi   | c <= t_lo
///   -----------+----------------------------+-------------------+---------------------------
///   correct    | auto_accept/high_agree     | human/uncert_band | human/evaluator_disagree
///   incorrect  | human/evaluator_disagree   | human/uncert_band | auto_reject/low_agree
///   uncertain  | human/judge_uncertain      | human/judge_unc.  | human/judge_uncertain
///
/// A would-be auto decision becomes human_review/score_jump when c rose by at
/// least `jump` over the same sample's previous-round confidence.
RoutingDecision vote_and_route(double c, JudgeLabel judge, const Thresholds& thresholds,
                               std::optional<double> previous_c = std::nullopt,
                               double jump = kDefaultScoreJump);

struct ConfidenceReport {
  std::string sample_id;
  double p_gen = 0.0;
  double p_disc = 0.5;
  double alpha = kDefaultAlpha;
  double c = 0.0;
  JudgeVerdict judge;
  RoutingDecision routing;
  std::optional<double> previous_c;
};

void to_json(nlohmann::json& j, const ConfidenceReport& r);
void from_json(const nlohmann::json& j, ConfidenceReport& r);
void to_json(nlohmann::json& j, const RoutingDecision& r);
void from_json(const nlohmann::json& j, RoutingDecision& r);

/// Evaluation-set member: ((X, Y), 1) or ((X, Y_hat), 0).
struct EvalPair {
  std::string sample_id;
  std::string prompt;
  std::string output;
  int label = 1;
  std::string eval_prompt;
};

void to_json(nlohmann::json& j, const EvalPair& p);

struct EvalPairs {
  EvalPair positive;
  EvalPair negative;
};

enum class NegativeStrategy {
  // Uniformly pick another option letter and pair it with the reasoning
  // sentence that option would have had.
  other_option,
};

/// Positive/negative pair for a valid sample; nullopt when the state has a
/// single option and no negative exists.
std::optional<EvalPairs> make_eval_pairs(const GenerationRecord& positive, const FsmGraph& graph,
                                         Rng& rng,
                                         NegativeStrategy strategy = NegativeStrategy::other_option);

enum class GoldDecision { accept, reject };

/// Fraction of auto decisions contradicting gold; human_review items are
/// excluded. nullopt when there are no auto decisions.
std::optional<double> evaluation_error_rate(std::span<const RoutingDecision> decisions,
                                            std::span<const GoldDecision> gold);

struct EnsembleConfig {
  double alpha = kDefaultAlpha;
  Thresholds thresholds;
  double score_jump = kDefaultScoreJump;
  std::string judge_prompt_version = "v0";
};

/// LLM-L (generative + discriminative) plus black-box judge over one sample.
class Ensemble {
 public:
  Ensemble(const Client& evaluator, const Client& judge, const PromptStore& prompts,
           std::shared_ptr<const FsmGraph> graph, EnsembleConfig config);

  /// Scores and routes a valid sample. Gateway errors propagate.
  ConfidenceReport evaluate(const GenerationRecord& sample, std::size_t sample_index,
                            std::optional<double> previous_c = std::nullopt) const;

  const EnsembleConfig& config() const { return config_; }

 private:
  const Client& evaluator_;
  const Client& judge_;
  const PromptStore& prompts_;
  std::shared_ptr<const FsmGraph> graph_;
  EnsembleConfig config_;
};

/// Y text for a sample: reasoning then label.
std::string sample_output(const GenerationRecord& sample);

}  // namespace ivrkit
