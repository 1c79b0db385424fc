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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ivrkit/gateway.hpp"
#include "ivrkit/rng.hpp"

namespace ivrkit {

/// Value that may vary by loop round; the last entry repeats.
class RoundSchedule {
 public:
  RoundSchedule() = default;
  explicit RoundSchedule(std::vector<double> values) : values_(std::move(values)) {}
  static RoundSchedule from_json(const nlohmann::json& j, double fallback);

  double at(int round) const;

 private:
  std::vector<double> values_;
};

/// Deterministic scripted backend for all three roles.
///
/// Behaviour comes from the profile's `mock` object:
///
///   common     latency_ms
///   policy     mode: "oracle" | "script" | "fixed"; script {state: text};
///              fixed; error_rate; invalid_rate
///   evaluator  probs [..] | token_prob; logits [g0, g1] | probability;
///              scripted {p_correct, p_incorrect, logits_correct,
///              logits_incorrect, flip_rate, flip_every}
///   judge      mode: "scripted" | "always_correct" | "always_incorrect" |
///              "text"; text; flip_rate; flip_every; uncertain_rate;
///              criteria_triggers {criterion: [phrase, ..]}
///
/// Rates accept a number or a per-round array. Randomness is keyed on
/// (seed, sample_id) when a sample id is present, so a sample draws the same
/// values regardless of call order; otherwise a seeded sequential stream is
/// used.
class MockBackend : public Backend {
 public:
  MockBackend(BackendProfile profile, std::shared_ptr<const FsmGraph> graph);

  std::string complete(const Request& request) override;
  std::vector<TokenScore> score(const Request& request, std::string_view target) override;
  JudgeScores judge(const Request& request) override;
  bool may_block() const override { return latency_ms_ > 0; }

  std::size_t call_count() const;

 private:
  struct Scripted {
    bool enabled = false;
    double p_correct = 0.95;
    double p_incorrect = 0.2;
    std::pair<double, double> logits_correct{0.0, 4.0};
    std::pair<double, double> logits_incorrect{4.0, 0.0};
    RoundSchedule flip_rate;
    RoundSchedule flip_every;
  };

  Rng request_rng(const RequestHints& hints, std::uint64_t salt);
  void simulate_latency() const;
  bool flipped(const RequestHints& hints, const RoundSchedule& rate, const RoundSchedule& every,
               std::uint64_t salt);
  bool sample_is_correct(const RequestHints& hints) const;

  std::string policy_output(const Request& request);
  std::string judge_output(const Request& request);

  BackendProfile profile_;
  std::shared_ptr<const FsmGraph> graph_;
  int latency_ms_ = 0;

  // policy
  std::string policy_mode_ = "oracle";
  std::map<std::string, std::string> script_;
  std::string fixed_;
  RoundSchedule error_rate_;
  RoundSchedule invalid_rate_;

  // evaluator
  std::optional<std::vector<double>> probs_;
  double token_prob_ = 0.9;
  std::optional<std::pair<double, double>> logits_;
  std::optional<double> probability_;
  Scripted scripted_;

  // judge
  std::string judge_mode_ = "scripted";
  std::string judge_text_;
  RoundSchedule judge_flip_rate_;
  RoundSchedule judge_flip_every_;
  RoundSchedule uncertain_rate_;
  std::map<std::string, std::vector<std::string>> criteria_triggers_;

  mutable std::mutex mu_;
  Rng sequential_;
  std::size_t calls_ = 0;
};

/// Index of the outgoing transition of `state` whose reply variants best
/// match `reply` (exact normalized match, then word-overlap).
std::size_t classify_reply(const FsmGraph& graph, const StateId& state, std::string_view reply);

}  // namespace ivrkit
