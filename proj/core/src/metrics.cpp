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

#include "ivrkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivrkit/dialogue.hpp"

namespace ivrkit {

using json = nlohmann::json;

namespace {

json ratio_json(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  return json{{"numerator", r->numerator}, {"denominator", r->denominator}, {"value", r->value()}};
}

json latency_json(const LatencySummary& l) {
  return json{{"p50_ms", l.p50}, {"p99_ms", l.p99}, {"samples", l.samples}};
}

std::optional<Ratio> count_true(std::span<const bool> flags) {
  if (flags.empty()) return std::nullopt;
  return Ratio{static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)), flags.size()};
}

}  // namespace

json to_json(const MetricsSnapshot& m) {
  json by_attr = json::object();
  for (const auto& [goal, r] : m.tsr_by_attribute) by_attr[goal] = ratio_json(r);
  return json{{"cr", ratio_json(m.cr)},
              {"tsr", ratio_json(m.tsr)},
              {"hallucination_rate", ratio_json(m.hallucination_rate)},
              {"raw_invalid_rate", ratio_json(m.raw_invalid_rate)},
              {"human_judge_ratio", ratio_json(m.human_judge_ratio)},
              {"latency", latency_json(m.latency)},
              {"overhead", latency_json(m.overhead)},
              {"tsr_by_attribute", by_attr}};
}

std::optional<Ratio> compute_cr(std::span<const bool> judgments) { return count_true(judgments); }

std::optional<Ratio> compute_tsr(std::span<const bool> successes) { return count_true(successes); }

std::optional<Ratio> compute_tsr(std::span<const DialogueTranscript> transcripts) {
  Ratio r;
  for (const auto& t : transcripts) {
    for (const auto& turn : t.turns) {
      ++r.denominator;
      if (query_succeeded(turn)) ++r.numerator;
    }
  }
  if (r.denominator == 0) return std::nullopt;
  return r;
}

std::map<std::string, Ratio> tsr_by_attribute(std::span<const DialogueTranscript> transcripts,
                                              const FsmGraph& graph) {
  std::map<std::string, Ratio> out;
  for (const auto& t : transcripts) {
    for (const auto& turn : t.turns) {
      auto& r = out[graph.state(turn.state).goal];
      ++r.denominator;
      if (query_succeeded(turn)) ++r.numerator;
    }
  }
  return out;
}

std::optional<Ratio> hallucination_rate(std::span<const DialogueTranscript> transcripts,
                                        const FsmGraph& graph) {
  Ratio r;
  for (const auto& t : transcripts) {
    for (const auto& turn : t.turns) {
      ++r.denominator;
      if (!is_permitted_query(graph, turn.state, turn.emitted_query)) ++r.numerator;
    }
  }
  if (r.denominator == 0) return std::nullopt;
  return r;
}

std::optional<Ratio> raw_invalid_rate(std::span<const GenerationRecord> records) {
  if (records.empty()) return std::nullopt;
  Ratio r{0, records.size()};
  for (const auto& rec : records)
    if (!rec.valid) ++r.numerator;
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  if (!(q > 0.0 && q <= 100.0)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

LatencySummary summarize(std::vector<double> values) {
  if (values.empty()) return {};
  const auto n = values.size();
  return {percentile(values, 50.0), percentile(std::move(values), 99.0), n};
}

std::pair<LatencySummary, LatencySummary> latency_summary(
    std::span<const DialogueTranscript> transcripts) {
  std::vector<double> total;
  std::vector<double> overhead;
  for (const auto& t : transcripts) {
    for (const auto& turn : t.turns) {
      total.push_back(turn.latency_ms);
      overhead.push_back(std::max(0.0, turn.latency_ms - turn.backend_ms));
    }
  }
  return {summarize(std::move(total)), summarize(std::move(overhead))};
}

MetricsSnapshot session_metrics(std::span<const DialogueTranscript> transcripts,
                                std::span<const GenerationRecord> records, const FsmGraph& graph) {
  MetricsSnapshot m;
  m.tsr = compute_tsr(transcripts);
  m.tsr_by_attribute = tsr_by_attribute(transcripts, graph);
  m.hallucination_rate = hallucination_rate(transcripts, graph);
  m.raw_invalid_rate = raw_invalid_rate(records);
  std::tie(m.latency, m.overhead) = latency_summary(transcripts);
  return m;
}

}  // namespace ivrkit
