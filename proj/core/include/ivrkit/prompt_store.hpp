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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivrkit {

struct PromptVersion {
  std::string id;  // "v0", "v1", ...
  std::string body;
  std::string changelog;
};

/// Append-only history of black-box judge prompts.
///
/// On disk: one `<id>.txt` body per version plus `index.json` listing
/// {id, file, changelog} in order. Written versions are never modified.
class PromptStore {
 public:
  /// Store seeded with a single v0 holding `initial_body`; not persisted.
  static PromptStore in_memory(std::string initial_body);
  /// Opens `dir`, creating it with v0 = `initial_body` when no index exists.
  static PromptStore open(const std::filesystem::path& dir, const std::string& initial_body);

  const PromptVersion& latest() const { return versions_.back(); }
  const PromptVersion* find(std::string_view id) const;
  const std::vector<PromptVersion>& versions() const { return versions_; }

  /// Appends a version whose body adds one criterion line per annotation not
  /// already present. Returns nullopt (and writes nothing) when nothing is new.
  std::optional<PromptVersion> revise(const std::vector<std::string>& annotations);

 private:
  void persist(const PromptVersion& v) const;

  std::optional<std::filesystem::path> dir_;
  std::vector<PromptVersion> versions_;
};

/// Baseline judge instructions (version v0).
std::string default_judge_prompt();

/// Criterion line appended for an annotator annotation.
std::string criterion_line(std::string_view annotation);

/// Annotations recovered from the criterion lines of a prompt body.
std::vector<std::string> extract_criteria(std::string_view body);

}  // namespace ivrkit
