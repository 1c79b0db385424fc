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

#include "ivrkit/prompt_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ivrkit {

using json = nlohmann::json;

namespace {

constexpr std::string_view kCriterionPrefix = "- If the owner ";
constexpr std::string_view kCriterionSuffix = ", continuing to ask questions is incorrect.";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

}  // namespace

std::string default_judge_prompt() {
  return "You are reviewing an automated phone agent that verifies business information "
         "with shop owners. Given the conversation, the reply options and the agent's "
         "choice, decide whether the chosen next query is appropriate for the owner's "
         "last reply.\n"
         "Criteria:\n"
         "- The chosen option must match the intent of the owner's last reply.\n";
}

std::string criterion_line(std::string_view annotation) {
  return std::string(kCriterionPrefix) + std::string(annotation) + std::string(kCriterionSuffix);
}

std::vector<std::string> extract_criteria(std::string_view body) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    const auto line = body.substr(pos, end - pos);
    if (line.starts_with(kCriterionPrefix) && line.ends_with(kCriterionSuffix))
      out.emplace_back(line.substr(kCriterionPrefix.size(),
                                   line.size() - kCriterionPrefix.size() - kCriterionSuffix.size()));
    pos = end + 1;
  }
  return out;
}

PromptStore PromptStore::in_memory(std::string initial_body) {
  PromptStore s;
  s.versions_.push_back({"v0", std::move(initial_body), "initial prompt"});
  return s;
}

PromptStore PromptStore::open(const std::filesystem::path& dir, const std::string& initial_body) {
  PromptStore s;
  s.dir_ = dir;
  const auto index_path = dir / "index.json";
  if (!std::filesystem::exists(index_path)) {
    std::filesystem::create_directories(dir);
    s.versions_.push_back({"v0", initial_body, "initial prompt"});
    s.persist(s.versions_.back());
    return s;
  }
  const auto index = json::parse(read_file(index_path));
  for (const auto& entry : index.at("versions")) {
    PromptVersion v;
    v.id = entry.at("id").get<std::string>();
    v.changelog = entry.value("changelog", "");
    v.body = read_file(dir / entry.at("file").get<std::string>());
    s.versions_.push_back(std::move(v));
  }
  if (s.versions_.empty()) throw std::runtime_error("prompt store index is empty: " + dir.string());
  return s;
}

const PromptVersion* PromptStore::find(std::string_view id) const {
  for (const auto& v : versions_)
    if (v.id == id) return &v;
  return nullptr;
}

std::optional<PromptVersion> PromptStore::revise(const std::vector<std::string>& annotations) {
  const auto& base = latest();
  auto known = extract_criteria(base.body);
  std::string body = base.body;
  std::vector<std::string> added;
  for (const auto& a : annotations) {
    if (a.empty() || std::find(known.begin(), known.end(), a) != known.end()) continue;
    if (!body.empty() && body.back() != '\n') body += '\n';
    body += criterion_line(a);
    body += '\n';
    known.push_back(a);
    added.push_back(a);
  }
  if (added.empty()) return std::nullopt;

  PromptVersion v;
  v.id = "v" + std::to_string(versions_.size());
  v.body = std::move(body);
  v.changelog = "added criteria:";
  for (const auto& a : added) v.changelog += " \"" + a + "\"";
  versions_.push_back(v);
  persist(v);
  return v;
}

void PromptStore::persist(const PromptVersion& v) const {
  if (!dir_) return;
  const auto file = *dir_ / (v.id + ".txt");
  if (std::filesystem::exists(file)) throw std::runtime_error("prompt version exists: " + v.id);
  write_file(file, v.body);
  json index{{"versions", json::array()}};
  for (const auto& e : versions_)
    index["versions"].push_back({{"id", e.id}, {"file", e.id + ".txt"}, {"changelog", e.changelog}});
  write_file(*dir_ / "index.json", index.dump(2) + "\n");
}

}  // namespace ivrkit
