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

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ivrkit/augmentor.hpp"
#include "ivrkit/fsm.hpp"

namespace ivrkit {

struct ReportBundle {
  nlohmann::json series;  // machine-readable, one entry per round
  std::string table;      // markdown
};

/// Pre-augmentation (weighted log replay) versus post-augmentation (uniform
/// corpus) distributions over n dialogues each.
nlohmann::json augmentation_comparison(const FsmGraph& graph, std::size_t n, std::uint64_t seed,
                                       std::size_t max_length = 10);

/// Reads round-*/manifest.json, round-*/latency.json and augmentation.json.
/// A run directory with no rounds yields an empty report. Throws
/// std::runtime_error when the directory is missing or a round has no
/// manifest.
ReportBundle build_report(const std::filesystem::path& run_dir);

/// Writes report.json and report.md into `run_dir`.
void write_report(const std::filesystem::path& run_dir, const ReportBundle& report);

}  // namespace ivrkit
