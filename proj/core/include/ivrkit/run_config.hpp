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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/dialogue.hpp"
#include "ivrkit/evaluator.hpp"
#include "ivrkit/gateway.hpp"
#include "ivrkit/simulator.hpp"

namespace ivrkit {

/// One annotation the scripted annotator attaches in a given round.
struct ScriptedAnnotation {
  int round = 0;
  std::string text;
};

struct AnnotatorConfig {
  std::string id = "scripted";
  std::vector<ScriptedAnnotation> annotations;
};

/// Everything a loop run needs. Relative paths resolve against `base_dir`,
/// the directory holding the config file.
struct RunConfig {
  std::filesystem::path base_dir;
  std::string run_id = "run";
  std::filesystem::path fsm;
  std::uint64_t master_seed = 0;
  std::size_t sessions_per_round = 5000;
  std::size_t turn_budget = kDefaultTurnBudget;
  std::string template_version = std::string(kTemplateV1);
  double alpha = kDefaultAlpha;
  Thresholds thresholds;
  double score_jump = kDefaultScoreJump;
  OwnerProfile profile;
  BackendProfile policy;
  BackendProfile evaluator;
  BackendProfile judge;
  // Policy id per round, last entry repeats; empty means policy.identifier.
  std::vector<std::string> policy_ids;
  std::filesystem::path runs_dir = "runs";
  std::optional<std::filesystem::path> judge_prompt;  // v0 body, default built in
  std::optional<std::filesystem::path> verdicts;      // file drop
  std::optional<AnnotatorConfig> annotator;
  bool partial = false;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::string policy_id_for(int round) const;
};

/// Throws std::invalid_argument naming the offending key.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ivrkit
