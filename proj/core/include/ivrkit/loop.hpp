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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/augmentor.hpp"
#include "ivrkit/dialogue.hpp"
#include "ivrkit/evaluator.hpp"
#include "ivrkit/metrics.hpp"
#include "ivrkit/prompt_store.hpp"
#include "ivrkit/review.hpp"
#include "ivrkit/run_config.hpp"
#include "ivrkit/simulator.hpp"

namespace ivrkit {

enum class Partition { accepted, rejected, human_queue };
std::string_view to_string(Partition p);

Partition partition_of(const RoutingDecision& routing);

struct ScoredSample {
  GenerationRecord record;
  ConfidenceReport report;
  Partition routed = Partition::human_queue;
  std::optional<ReviewVerdict> verdict;  // human_queue items only

  /// Partition after human review; unreviewed queue items stay human_queue.
  Partition resolved() const;
};

struct GrowBatch {
  int round = 0;
  std::vector<ScoredSample> samples;
  std::vector<DialogueTranscript> transcripts;
  std::vector<ReviewVerdict> applied_verdicts;  // in ingestion order
  std::vector<nlohmann::json> audit;            // superseded verdicts
  bool aborted = false;  // a backend failed mid-grow; samples are partial
  std::string abort_reason;

  std::size_t count(Partition p) const;  // by routing
  std::size_t pending() const;
};

/// Previous-round confidence keyed by (prompt, chosen label).
using ScoreCache = std::map<std::string, double>;
std::string score_key(const GenerationRecord& record);
ScoreCache score_cache(const GrowBatch& batch);

struct GrowInputs {
  std::shared_ptr<const FsmGraph> graph;
  const Client* policy = nullptr;
  const Ensemble* ensemble = nullptr;
  OwnerProfile profile;
  std::uint64_t master_seed = 0;
  std::size_t turn_budget = kDefaultTurnBudget;
  std::string template_version = std::string(kTemplateV1);
  const ScoreCache* previous = nullptr;
};

/// Runs n sessions with the current policy and scores and routes every
/// record. Invalid outputs are not scored and route to
/// auto_reject/invalid_output. A gateway failure while scoring stops the
/// batch and marks it aborted.
GrowBatch grow(const GrowInputs& in, int round, std::size_t n);

/// Applies verdicts to queued samples, last write wins; superseded verdicts
/// land in batch.audit. Throws std::invalid_argument for unknown or
/// non-queued sample ids and for invalid labels, leaving the batch unchanged.
void ingest_verdicts(GrowBatch& batch, std::span<const ReviewVerdict> verdicts);

struct IterationMetrics {
  std::optional<Ratio> human_judge_ratio;  // |human_queue| / |samples|
  std::optional<double> evaluation_error_rate;
  std::optional<double> avg_score;  // mean c over scored samples
};

nlohmann::json to_json(const IterationMetrics& m);

/// Gold decisions come from each record's gold label when `use_gold`.
IterationMetrics iteration_metrics(const GrowBatch& batch, bool use_gold = true);

struct DatasetRefs {
  std::string grow_raw = "grow_raw.jsonl";
  std::string human_queue = "human_queue.jsonl";
  std::string verdicts = "verdicts.jsonl";
  std::string grow_accepted = "grow_accepted.jsonl";
  std::string eval_pairs = "eval_pairs.jsonl";
};

struct IterationManifest {
  int round = 0;
  std::string policy_id;
  Thresholds thresholds;
  double alpha = kDefaultAlpha;
  double score_jump = kDefaultScoreJump;
  DatasetRefs dataset_refs;
  std::string judge_prompt_version = "v0";
  std::uint64_t master_seed = 0;
  std::size_t sessions = 0;
  IterationMetrics metrics;
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json session_metrics = nlohmann::json::object();
  std::optional<std::string> prompt_revised_to;
  bool partial = false;
};

nlohmann::json to_json(const IterationManifest& m);
IterationManifest manifest_from_json(const nlohmann::json& j);

/// Accepted example with the human correction applied: the label and the
/// reasoning sentence of the corrected option.
GenerationRecord accepted_record(const ScoredSample& s, const FsmGraph& graph);

/// Datasets accumulate across rounds, every row tagged with its round.
struct Datasets {
  std::vector<nlohmann::json> grow_accepted;
  std::vector<nlohmann::json> eval_pairs;
};

class LoopBlocked : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImproveInputs {
  const FsmGraph* graph = nullptr;
  PromptStore* prompts = nullptr;
  Datasets* datasets = nullptr;
  std::filesystem::path round_dir;
  std::string next_policy_id;
  bool partial = false;
};

/// Writes the cleaned grow set and evaluation pairs, revises the judge prompt
/// when verdicts carry new annotations, and returns the next round's
/// manifest. Throws LoopBlocked when queue items are pending and partial is
/// not allowed.
IterationManifest improve(const IterationManifest& current, const GrowBatch& batch,
                          const ImproveInputs& in);

/// Resolves every pending item from the record's gold label: accept when the
/// chosen label matches, correct to gold otherwise, reject without gold.
/// Scripted annotations for the round ride on the first verdict.
std::vector<ReviewVerdict> scripted_verdicts(const GrowBatch& batch, const AnnotatorConfig& config);

struct LoopOptions {
  int rounds = 1;
  std::optional<std::filesystem::path> verdicts;  // overrides config
  std::optional<bool> partial;                    // overrides config
  std::optional<std::filesystem::path> run_dir;   // default runs_dir/run_id
  bool overwrite = false;  // remove an existing run directory first
};

struct LoopResult {
  std::filesystem::path run_dir;
  std::vector<IterationManifest> manifests;
};

/// Writes runs/<id>/round-<t>/{manifest.json, grow_raw.jsonl,
/// human_queue.jsonl, verdicts.jsonl, grow_accepted.jsonl, eval_pairs.jsonl}
/// plus prompts/ and a per-round latency.json. Everything except latency.json
/// is a pure function of (config, seed, verdicts).
LoopResult run_loop(const RunConfig& config, const LoopOptions& options);

}  // namespace ivrkit
