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

#include "ivrkit/run_config.hpp"

#include <stdexcept>

#include "ivrkit/jsonl.hpp"

namespace ivrkit {

using json = nlohmann::json;

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

std::string RunConfig::policy_id_for(int round) const {
  if (policy_ids.empty()) return policy.identifier;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(round, 0)), policy_ids.size() - 1);
  return policy_ids[i];
}

namespace {

BackendProfile backend(const json& backends, const char* role, const std::filesystem::path& base) {
  if (!backends.contains(role)) throw std::invalid_argument(std::string("backends.") + role + " is required");
  auto j = backends.at(role);
  if (!j.contains("role")) j["role"] = role;
  auto p = profile_from_json(j, base);
  if (std::string_view(to_string(p.role)) != role)
    throw std::invalid_argument(std::string("backends.") + role + " declares role " +
                                std::string(to_string(p.role)));
  return p;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.run_id = j.value("run_id", c.run_id);
    if (c.run_id.empty() || c.run_id.find('/') != std::string::npos)
      throw std::invalid_argument("run_id must be a non-empty single path component");
    c.fsm = j.at("fsm").get<std::string>();
    c.master_seed = j.value("master_seed", c.master_seed);
    c.sessions_per_round = j.value("sessions_per_round", c.sessions_per_round);
    if (c.sessions_per_round == 0) throw std::invalid_argument("sessions_per_round must be >= 1");
    c.turn_budget = j.value("turn_budget", c.turn_budget);
    c.template_version = j.value("template_version", c.template_version);
    if (!is_known_template(c.template_version))
      throw std::invalid_argument("unknown template_version '" + c.template_version + "'");
    c.alpha = j.value("alpha", c.alpha);
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      c.thresholds.t_hi = t.value("t_hi", c.thresholds.t_hi);
      c.thresholds.t_lo = t.value("t_lo", c.thresholds.t_lo);
    }
    c.thresholds.validate();
    c.score_jump = j.value("score_jump", c.score_jump);

    if (j.contains("profile")) {
      const auto& p = j.at("profile");
      c.profile = p.is_string() ? load_profile_file(c.resolve(p.get<std::string>())) : p.get<OwnerProfile>();
    }
    const auto& backends = j.at("backends");
    c.policy = backend(backends, "policy", base_dir);
    c.evaluator = backend(backends, "evaluator", base_dir);
    c.judge = backend(backends, "judge", base_dir);

    c.policy_ids = j.value("policy_ids", c.policy_ids);
    c.runs_dir = j.value("runs_dir", c.runs_dir.string());
    if (j.contains("judge_prompt")) c.judge_prompt = j.at("judge_prompt").get<std::string>();
    if (j.contains("verdicts")) c.verdicts = j.at("verdicts").get<std::string>();
    if (j.contains("annotator")) {
      const auto& a = j.at("annotator");
      AnnotatorConfig ac;
      ac.id = a.value("id", ac.id);
      for (const auto& e : a.value("annotations", json::array()))
        ac.annotations.push_back({e.at("round").get<int>(), e.at("text").get<std::string>()});
      c.annotator = std::move(ac);
    }
    c.partial = j.value("partial", false);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return run_config_from_json(read_json_file(path), base);
}

}  // namespace ivrkit
