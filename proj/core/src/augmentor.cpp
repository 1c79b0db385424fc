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

#include "ivrkit/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ivrkit/prompt.hpp"

namespace ivrkit {

using json = nlohmann::json;

void to_json(json& j, const TrainingExample& e) {
  j = json{{"prompt", e.prompt},
           {"target_cot", e.target_cot},
           {"target_label", std::string(1, e.target_label)},
           {"meta", e.meta}};
}

void from_json(const json& j, TrainingExample& e) {
  e.prompt = j.at("prompt").get<std::string>();
  e.target_cot = j.at("target_cot").get<std::string>();
  const auto label = j.at("target_label").get<std::string>();
  if (label.size() != 1) throw std::invalid_argument("target_label must be a single letter");
  e.target_label = label[0];
  e.meta = j.value("meta", json::object());
}

const Path& sample_path(const PathGroups& groups, Rng& rng) {
  if (groups.empty()) throw std::invalid_argument("sample_path: no path groups");
  auto it = groups.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.uniform_index(groups.size())));
  const auto& paths = it->second;
  if (paths.empty()) throw std::invalid_argument("sample_path: empty length category");
  return paths[rng.uniform_index(paths.size())];
}

std::size_t sample_reply_index(const Transition& transition, Rng& rng) {
  return rng.uniform_index(transition.reply_variants.size());
}

const std::string& sample_reply(const Transition& transition, Rng& rng) {
  return transition.reply_variants[sample_reply_index(transition, rng)].text;
}

namespace {

std::vector<std::size_t> transitions_between(const FsmGraph& graph, const StateId& from,
                                             const StateId& to) {
  std::vector<std::size_t> out;
  for (auto ti : graph.outgoing(from))
    if (graph.transitions()[ti].target == to) out.push_back(ti);
  return out;
}

}  // namespace

SyntheticDialogue synthesize_dialogue(const FsmGraph& graph, const Path& path, Rng& rng) {
  if (path.empty() || path.front() != graph.initial())
    throw std::invalid_argument("invalid path: must start at the initial state");
  if (!graph.contains(path.back()) || !graph.is_terminal(path.back()))
    throw std::invalid_argument("invalid path: must end at a terminal state");

  SyntheticDialogue d;
  d.path = path;
  d.seed = rng.seed();
  std::string query = graph.state(path.front()).query;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!graph.contains(path[i]) || !graph.contains(path[i + 1]))
      throw std::invalid_argument("invalid path: unknown state");
    const auto candidates = transitions_between(graph, path[i], path[i + 1]);
    if (candidates.empty())
      throw std::invalid_argument("invalid path: no transition " + path[i].str() + " -> " +
                                  path[i + 1].str());
    const auto ti = candidates[rng.uniform_index(candidates.size())];
    const auto& t = graph.transitions()[ti];
    const auto vi = sample_reply_index(t, rng);
    d.turns.push_back({path[i], query, t.reply_variants[vi].text, ti, vi});
    query = graph.option_query(ti);
  }
  return d;
}

SyntheticDialogue replay_weighted_dialogue(const FsmGraph& graph, Rng& rng, std::size_t max_length) {
  SyntheticDialogue d;
  d.seed = rng.seed();
  StateId state = graph.initial();
  std::string query = graph.state(state).query;
  d.path.push_back(state);
  while (!graph.is_terminal(state) && d.path.size() < max_length) {
    const auto& out = graph.outgoing(state);
    std::vector<double> class_weights;
    for (auto ti : out) class_weights.push_back(graph.transitions()[ti].class_weight());
    const auto ti = out[rng.weighted_index(class_weights)];
    const auto& t = graph.transitions()[ti];
    std::vector<double> variant_weights;
    for (const auto& v : t.reply_variants) variant_weights.push_back(v.effective_weight());
    const auto vi = rng.weighted_index(variant_weights);
    d.turns.push_back({state, query, t.reply_variants[vi].text, ti, vi});
    query = graph.option_query(ti);
    state = t.target;
    d.path.push_back(state);
  }
  return d;
}

std::vector<TrainingExample> to_training_examples(const SyntheticDialogue& dialogue,
                                                  const FsmGraph& graph,
                                                  std::string_view template_version) {
  if (!is_known_template(template_version))
    throw std::invalid_argument("unknown template version '" + std::string(template_version) + "'");
  std::vector<TrainingExample> out;
  std::vector<std::pair<std::string, std::string>> history;
  json path = json::array();
  for (const auto& s : dialogue.path) path.push_back(s.str());

  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const auto& turn = dialogue.turns[i];
    history.emplace_back(turn.agent_query, turn.user_reply);
    const auto options = candidate_options(graph, turn.state);
    const auto label = options.label_for_transition(turn.transition_index);
    if (!label) throw std::invalid_argument("dialogue turn does not replay through the FSM");

    TrainingExample e;
    e.prompt = render_selection_prompt(history, options, template_version);
    e.target_cot = render_cot(graph, turn.transition_index, template_version);
    e.target_label = *label;
    e.meta = json{{"seed", dialogue.seed},
                  {"path", path},
                  {"template_version", template_version},
                  {"turn", i},
                  {"state", turn.state.str()},
                  {"transition", turn.transition_index},
                  {"variant", turn.variant_index},
                  {"reply", turn.user_reply}};
    out.push_back(std::move(e));
  }
  return out;
}

Corpus generate_corpus(const FsmGraph& graph, const CorpusOptions& options) {
  const auto groups = enumerate_paths(graph, options.max_length);
  if (groups.empty()) throw std::invalid_argument("FSM has no complete path within max_length");
  const Rng master(options.seed);
  const std::size_t cap = options.dedup ? 10 * options.n : options.n;

  Corpus corpus;
  std::set<std::vector<std::size_t>> seen;
  while (corpus.dialogues.size() < options.n && corpus.attempts < cap) {
    auto rng = master.split(corpus.attempts++);
    auto d = synthesize_dialogue(graph, sample_path(groups, rng), rng);
    if (options.dedup) {
      // Path plus every (transition, variant) choice identifies a dialogue.
      std::vector<std::size_t> key;
      for (const auto& t : d.turns) {
        key.push_back(t.transition_index);
        key.push_back(t.variant_index);
      }
      if (!seen.insert(std::move(key)).second) continue;
    }
    corpus.dialogues.push_back(std::move(d));
  }
  corpus.exhausted = corpus.dialogues.size() < options.n;
  return corpus;
}

json to_json(const DistributionReport& r) {
  json replies = json::object();
  for (const auto& [k, v] : r.reply_counts) replies[k] = v;
  json turns = json::object();
  for (const auto& [k, v] : r.turn_counts) turns[std::to_string(k)] = v;
  return json{{"dialogues", r.dialogues},
              {"reply_counts", replies},
              {"turn_counts", turns},
              {"reply_max_deviation", r.reply_max_deviation},
              {"turn_max_deviation", r.turn_max_deviation},
              {"max_deviation", r.max_deviation}};
}

DistributionReport distribution_report(std::span<const SyntheticDialogue> dialogues,
                                       const FsmGraph* graph) {
  if (dialogues.empty()) throw std::invalid_argument("distribution_report: no dialogues");
  DistributionReport r;
  r.dialogues = dialogues.size();

  std::map<std::size_t, std::map<std::size_t, std::size_t>> per_transition;
  for (const auto& d : dialogues) {
    ++r.turn_counts[d.turns.size()];
    for (const auto& t : d.turns) {
      ++r.reply_counts[t.user_reply];
      ++per_transition[t.transition_index][t.variant_index];
    }
  }

  const double n = static_cast<double>(dialogues.size());
  const double expected_turn = 1.0 / static_cast<double>(r.turn_counts.size());
  for (const auto& [_, count] : r.turn_counts)
    r.turn_max_deviation = std::max(r.turn_max_deviation, std::abs(count / n - expected_turn));

  for (const auto& [ti, counts] : per_transition) {
    std::size_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    const std::size_t variants =
        graph ? graph->transitions()[ti].reply_variants.size() : counts.size();
    const double expected = 1.0 / static_cast<double>(variants);
    for (std::size_t vi = 0; vi < variants; ++vi) {
      const auto it = graph ? counts.find(vi) : std::next(counts.begin(), static_cast<std::ptrdiff_t>(vi));
      const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      r.reply_max_deviation =
          std::max(r.reply_max_deviation, std::abs(c / static_cast<double>(total) - expected));
    }
  }
  r.max_deviation = std::max(r.reply_max_deviation, r.turn_max_deviation);
  return r;
}

std::vector<SyntheticDialogue> dialogues_from_examples(std::span<const TrainingExample> examples) {
  // Keyed by (seed, path) so examples from one dialogue regroup.
  std::map<std::pair<std::uint64_t, std::string>, SyntheticDialogue> grouped;
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& e : examples) {
    const auto key = std::pair{e.meta.at("seed").get<std::uint64_t>(), e.meta.at("path").dump()};
    auto [it, inserted] = grouped.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.seed = key.first;
      for (const auto& s : e.meta.at("path")) it->second.path.emplace_back(s.get<std::string>());
    }
    it->second.turns.push_back({StateId(e.meta.at("state").get<std::string>()), "",
                                e.meta.at("reply").get<std::string>(),
                                e.meta.at("transition").get<std::size_t>(),
                                e.meta.at("variant").get<std::size_t>()});
  }
  std::vector<SyntheticDialogue> out;
  out.reserve(order.size());
  for (const auto& key : order) out.push_back(std::move(grouped.at(key)));
  return out;
}

void write_training_examples(const std::filesystem::path& path,
                             std::span<const TrainingExample> examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : examples) out << json(e).dump() << '\n';
}

std::vector<TrainingExample> read_training_examples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<TrainingExample> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line).get<TrainingExample>());
  return out;
}

}  // namespace ivrkit
