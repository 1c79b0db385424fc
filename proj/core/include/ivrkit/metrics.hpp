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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/fsm.hpp"
#include "ivrkit/records.hpp"

namespace ivrkit {

/// Integer numerator over denominator; value() is the only division.
struct Ratio {
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct LatencySummary {
  double p50 = 0.0;
  double p99 = 0.0;
  std::size_t samples = 0;
};

struct MetricsSnapshot {
  std::optional<Ratio> cr;                  // N_C / N
  std::optional<Ratio> tsr;                 // N_S / N_T
  std::optional<Ratio> hallucination_rate;  // validated pipeline
  std::optional<Ratio> raw_invalid_rate;    // model outputs before validation
  std::optional<Ratio> human_judge_ratio;
  LatencySummary latency;   // whole turn
  LatencySummary overhead;  // turn minus backend call
  std::map<std::string, Ratio> tsr_by_attribute;
};

nlohmann::json to_json(const MetricsSnapshot& m);

/// nullopt on empty input.
std::optional<Ratio> compute_cr(std::span<const bool> judgments);

/// Per-prompt success flags; nullopt when there are no prompts.
std::optional<Ratio> compute_tsr(std::span<const bool> successes);
/// Every turn is one query prompt; fallback prompts count too.
std::optional<Ratio> compute_tsr(std::span<const DialogueTranscript> transcripts);

/// TSR split by the goal of the state each prompt was answered in. Prompts in
/// goal-less states are grouped under "".
std::map<std::string, Ratio> tsr_by_attribute(std::span<const DialogueTranscript> transcripts,
                                              const FsmGraph& graph);

/// Fraction of emitted agent queries outside the permitted set of their turn.
std::optional<Ratio> hallucination_rate(std::span<const DialogueTranscript> transcripts,
                                        const FsmGraph& graph);

/// Fraction of raw model outputs that failed validation.
std::optional<Ratio> raw_invalid_rate(std::span<const GenerationRecord> records);

/// Nearest-rank percentile, q in (0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double q);

LatencySummary summarize(std::vector<double> values);
/// Turn latency and orchestration overhead (turn minus backend time).
std::pair<LatencySummary, LatencySummary> latency_summary(
    std::span<const DialogueTranscript> transcripts);

/// Everything derivable from finished sessions. CR and human_judge_ratio are
/// left unset; they need judgments and routing.
MetricsSnapshot session_metrics(std::span<const DialogueTranscript> transcripts,
                                std::span<const GenerationRecord> records, const FsmGraph& graph);

}  // namespace ivrkit
