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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/fsm.hpp"
#include "ivrkit/rng.hpp"

namespace ivrkit {

inline constexpr std::size_t kDefaultCorpusSize = 5000;

struct SyntheticTurn {
  StateId state;
  std::string agent_query;
  std::string user_reply;
  std::size_t transition_index = 0;
  std::size_t variant_index = 0;
};

struct SyntheticDialogue {
  Path path;
  std::vector<SyntheticTurn> turns;  // one per path edge
  std::uint64_t seed = 0;
};

struct TrainingExample {
  std::string prompt;
  std::string target_cot;
  char target_label = 'A';
  nlohmann::json meta;
};

void to_json(nlohmann::json& j, const TrainingExample& e);
void from_json(const nlohmann::json& j, TrainingExample& e);

/// Length category uniformly, then a path uniformly within it.
const Path& sample_path(const PathGroups& groups, Rng& rng);

/// Uniform over variants; empirical weights are deliberately ignored.
std::size_t sample_reply_index(const Transition& transition, Rng& rng);
const std::string& sample_reply(const Transition& transition, Rng& rng);

/// Throws std::invalid_argument when `path` does not replay through `graph`.
SyntheticDialogue synthesize_dialogue(const FsmGraph& graph, const Path& path, Rng& rng);

/// Walk that follows empirical class and variant weights, as production
/// logs would. Baseline for distribution comparisons.
SyntheticDialogue replay_weighted_dialogue(const FsmGraph& graph, Rng& rng, std::size_t max_length);

/// One example per turn, labelled with the option of the transition taken.
std::vector<TrainingExample> to_training_examples(const SyntheticDialogue& dialogue,
                                                  const FsmGraph& graph,
                                                  std::string_view template_version);

struct CorpusOptions {
  std::size_t n = kDefaultCorpusSize;
  std::uint64_t seed = 0;
  std::size_t max_length = 10;
  bool dedup = true;  // drop exact duplicates, at most 10 * n attempts
};

struct Corpus {
  std::vector<SyntheticDialogue> dialogues;
  std::size_t attempts = 0;
  bool exhausted = false;  // dedup cap hit before n unique dialogues
};

/// Dialogue i (attempt a) draws from Rng(seed).split(a).
Corpus generate_corpus(const FsmGraph& graph, const CorpusOptions& options);

struct DistributionReport {
  std::map<std::string, std::size_t> reply_counts;  // by utterance
  std::map<std::size_t, std::size_t> turn_counts;   // by turns per dialogue
  double reply_max_deviation = 0.0;  // vs. uniform within each transition
  double turn_max_deviation = 0.0;   // vs. uniform over observed turn counts
  double max_deviation = 0.0;
  std::size_t dialogues = 0;
};

nlohmann::json to_json(const DistributionReport& r);

/// Histograms plus max deviation from uniform. With a graph, each transition's
/// expectation covers all its variants; without, only observed ones.
DistributionReport distribution_report(std::span<const SyntheticDialogue> dialogues,
                                       const FsmGraph* graph = nullptr);

/// Rebuilds dialogues from training-example metadata (JSONL produced by
/// write_training_examples).
std::vector<SyntheticDialogue> dialogues_from_examples(std::span<const TrainingExample> examples);

void write_training_examples(const std::filesystem::path& path,
                             std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_training_examples(const std::filesystem::path& path);

}  // namespace ivrkit
