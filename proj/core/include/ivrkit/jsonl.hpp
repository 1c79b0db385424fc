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
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace ivrkit {

/// One compact JSON document per line, '\n' terminated, truncating `path`.
void write_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> rows);

/// Blank lines are skipped; parse errors name the file and line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace ivrkit
