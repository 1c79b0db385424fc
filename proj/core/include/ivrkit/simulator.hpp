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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/dialogue.hpp"
#include "ivrkit/fsm.hpp"
#include "ivrkit/rng.hpp"

namespace ivrkit {

struct ConfusionEntry {
  std::string phrase;
  std::string replacement;
  double probability = 0.0;
};

struct NoiseConfig {
  std::vector<ConfusionEntry> confusion_table;
  double insertion_rate = 0.0;  // per codepoint, duplicates it
  double deletion_rate = 0.0;   // per codepoint
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless every probability is in [0, 1].
  void validate() const;
  bool is_identity() const;
};

enum class ProfileMode { empirical, uniform };

struct OwnerProfile {
  ProfileMode mode = ProfileMode::uniform;
  // Empirical mode: state -> reply_class -> probability. States absent here
  // fall back to the FSM's normalized class weights.
  std::map<std::string, std::map<std::string, double>> transition_weights;
  NoiseConfig noise;
  // Share of replies drawn from a transition's longer half of variants;
  // unset means no verbosity bias.
  std::optional<double> long_ratio;

  /// Throws std::invalid_argument on unknown states or classes, negative
  /// weights, or per-state weights not summing to 1.
  void validate(const FsmGraph& graph) const;
};

void to_json(nlohmann::json& j, const NoiseConfig& n);
void from_json(const nlohmann::json& j, NoiseConfig& n);
void to_json(nlohmann::json& j, const OwnerProfile& p);
void from_json(const nlohmann::json& j, OwnerProfile& p);

OwnerProfile load_profile_file(const std::filesystem::path& path);

/// Per-outgoing-transition probabilities of `state` under `profile`.
std::vector<double> reply_distribution(const OwnerProfile& profile, const FsmGraph& graph,
                                       const StateId& state);

struct OwnerResponse {
  std::string utterance;
  std::size_t transition_index = 0;  // ground truth; noise never changes it
  std::size_t variant_index = 0;
  bool noised = false;
};

/// Throws std::invalid_argument for terminal or unknown states.
OwnerResponse respond(const OwnerProfile& profile, const FsmGraph& graph, const StateId& state,
                      Rng& rng);

struct NoisedUtterance {
  std::string text;
  bool substituted = false;     // a confusion-table entry fired
  std::size_t char_edits = 0;   // codepoint insertions plus deletions
  bool altered() const { return substituted || char_edits > 0; }
};

/// Confusion-table entries fire independently (first occurrence of the
/// phrase), then codepoint-level insertion and deletion.
NoisedUtterance inject_asr_noise(std::string_view utterance, const NoiseConfig& noise, Rng& rng);

/// Number of UTF-8 codepoints; invalid bytes count as one each.
std::size_t utf8_length(std::string_view text);

enum class TestsetKind { effect, general, robust };
std::string_view to_string(TestsetKind k);
TestsetKind testset_kind_from_string(std::string_view s);

struct TestItem {
  StateId state;
  std::string agent_query;
  std::string utterance;
  std::size_t transition_index = 0;
  std::size_t variant_index = 0;
  char gold_label = 'A';
  bool noised = false;
  nlohmann::json provenance;
};

void to_json(nlohmann::json& j, const TestItem& t);
void from_json(const nlohmann::json& j, TestItem& t);

struct TestsetOptions {
  OwnerProfile profile;  // effect mode weights
  // Robust mode: minimum codepoint length; unset means P90 of all variant lengths.
  std::optional<std::size_t> min_length;
  // Robust mode: share of items drawn from the whole pool and noise-perturbed.
  double noised_fraction = 0.0;
};

/// effect: state uniform, class and variant by empirical weights.
/// general: uniform over every (state, transition, variant).
/// robust: uniform over variants at least min_length long, or perturbed.
/// Robust mode with no long variants throws std::invalid_argument.
std::vector<TestItem> build_testset(const FsmGraph& graph, TestsetKind kind, std::size_t n,
                                    Rng& rng, const TestsetOptions& options = {});

/// Codepoint length at the 90th percentile (nearest rank) of all variants.
std::size_t variant_length_p90(const FsmGraph& graph);

/// Owner driven by a profile, for full-session runs.
class SimulatedOwner : public UserAgent {
 public:
  SimulatedOwner(OwnerProfile profile, Rng rng) : profile_(std::move(profile)), rng_(rng) {}
  UserReply respond(const FsmGraph& graph, const StateId& state,
                    std::string_view agent_query) override;

 private:
  OwnerProfile profile_;
  Rng rng_;
};

}  // namespace ivrkit
