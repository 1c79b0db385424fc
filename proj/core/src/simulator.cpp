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

#include "ivrkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ivrkit {

using json = nlohmann::json;

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(what + " must be in [0, 1]");
}

// Byte length of the UTF-8 sequence starting with `lead`.
std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::string_view> codepoints(std::string_view text) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < text.size();) {
    auto len = std::min(sequence_length(static_cast<unsigned char>(text[i])), text.size() - i);
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::size_t pick_variant(const OwnerProfile& profile, const Transition& t, Rng& rng) {
  std::vector<std::size_t> pool(t.reply_variants.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  if (profile.long_ratio && pool.size() > 1) {
    std::vector<std::size_t> lengths;
    for (const auto& v : t.reply_variants) lengths.push_back(utf8_length(v.text));
    auto sorted = lengths;
    std::sort(sorted.begin(), sorted.end());
    const auto median = sorted[sorted.size() / 2];
    const bool want_long = rng.bernoulli(*profile.long_ratio);
    std::vector<std::size_t> side;
    for (auto i : pool)
      if ((lengths[i] >= median) == want_long) side.push_back(i);
    if (!side.empty()) pool = std::move(side);
  }

  if (profile.mode == ProfileMode::uniform) return pool[rng.uniform_index(pool.size())];
  std::vector<double> weights;
  for (auto i : pool) weights.push_back(t.reply_variants[i].effective_weight());
  return pool[rng.weighted_index(weights)];
}

}  // namespace

std::size_t utf8_length(std::string_view text) { return codepoints(text).size(); }

void NoiseConfig::validate() const {
  for (const auto& e : confusion_table) {
    if (e.phrase.empty()) throw std::invalid_argument("confusion entry with empty phrase");
    check_probability(e.probability, "confusion probability for '" + e.phrase + "'");
  }
  check_probability(insertion_rate, "insertion_rate");
  check_probability(deletion_rate, "deletion_rate");
}

bool NoiseConfig::is_identity() const {
  const bool table_idle = std::all_of(confusion_table.begin(), confusion_table.end(),
                                      [](const ConfusionEntry& e) { return e.probability == 0.0; });
  return table_idle && insertion_rate == 0.0 && deletion_rate == 0.0;
}

void OwnerProfile::validate(const FsmGraph& graph) const {
  noise.validate();
  if (long_ratio) check_probability(*long_ratio, "long_ratio");
  for (const auto& [state, weights] : transition_weights) {
    const StateId id(state);
    if (!graph.contains(id)) throw std::invalid_argument("profile names unknown state '" + state + "'");
    double total = 0.0;
    for (const auto& [cls, w] : weights) {
      const auto& out = graph.outgoing(id);
      const bool known = std::any_of(out.begin(), out.end(), [&](std::size_t ti) {
        return graph.transitions()[ti].reply_class == cls;
      });
      if (!known)
        throw std::invalid_argument("profile names unknown reply class '" + cls + "' on state '" +
                                    state + "'");
      if (!(w >= 0.0)) throw std::invalid_argument("profile weight must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("profile weights for state '" + state + "' sum to " +
                                  std::to_string(total) + ", expected 1");
  }
}

void to_json(json& j, const NoiseConfig& n) {
  json table = json::array();
  for (const auto& e : n.confusion_table)
    table.push_back({{"phrase", e.phrase}, {"replacement", e.replacement}, {"probability", e.probability}});
  j = json{{"confusion_table", table},
           {"insertion_rate", n.insertion_rate},
           {"deletion_rate", n.deletion_rate},
           {"seed", n.seed}};
}

void from_json(const json& j, NoiseConfig& n) {
  n = {};
  for (const auto& e : j.value("confusion_table", json::array()))
    n.confusion_table.push_back({e.at("phrase").get<std::string>(),
                                 e.at("replacement").get<std::string>(),
                                 e.at("probability").get<double>()});
  n.insertion_rate = j.value("insertion_rate", 0.0);
  n.deletion_rate = j.value("deletion_rate", 0.0);
  n.seed = j.value("seed", std::uint64_t{0});
  n.validate();
}

void to_json(json& j, const OwnerProfile& p) {
  j = json{{"mode", p.mode == ProfileMode::uniform ? "uniform" : "empirical"},
           {"transition_weights", p.transition_weights},
           {"noise", p.noise}};
  if (p.long_ratio) j["long_ratio"] = *p.long_ratio;
}

void from_json(const json& j, OwnerProfile& p) {
  p = {};
  const auto mode = j.value("mode", std::string("uniform"));
  if (mode == "uniform") p.mode = ProfileMode::uniform;
  else if (mode == "empirical") p.mode = ProfileMode::empirical;
  else throw std::invalid_argument("unknown profile mode '" + mode + "'");
  if (j.contains("transition_weights"))
    p.transition_weights = j.at("transition_weights").get<decltype(p.transition_weights)>();
  if (j.contains("noise")) p.noise = j.at("noise").get<NoiseConfig>();
  if (j.contains("long_ratio")) p.long_ratio = j.at("long_ratio").get<double>();
}

OwnerProfile load_profile_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read profile " + path.string());
  return json::parse(in).get<OwnerProfile>();
}

std::vector<double> reply_distribution(const OwnerProfile& profile, const FsmGraph& graph,
                                       const StateId& state) {
  if (!graph.contains(state)) throw std::invalid_argument("unknown state '" + state.str() + "'");
  const auto& out = graph.outgoing(state);
  if (out.empty()) throw std::invalid_argument("state '" + state.str() + "' is terminal");

  std::vector<double> dist(out.size(), 1.0 / static_cast<double>(out.size()));
  if (profile.mode == ProfileMode::uniform) return dist;

  const auto it = profile.transition_weights.find(state.str());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& t = graph.transitions()[out[i]];
    if (it == profile.transition_weights.end()) {
      dist[i] = t.class_weight();
    } else {
      const auto w = it->second.find(t.reply_class);
      dist[i] = w == it->second.end() ? 0.0 : w->second;
    }
    total += dist[i];
  }
  if (!(total > 0.0))
    throw std::invalid_argument("no positive reply weight on state '" + state.str() + "'");
  for (auto& d : dist) d /= total;
  return dist;
}

OwnerResponse respond(const OwnerProfile& profile, const FsmGraph& graph, const StateId& state,
                      Rng& rng) {
  const auto dist = reply_distribution(profile, graph, state);
  const auto ti = graph.outgoing(state)[rng.weighted_index(dist)];
  const auto& t = graph.transitions()[ti];
  const auto vi = pick_variant(profile, t, rng);

  OwnerResponse r{t.reply_variants[vi].text, ti, vi, false};
  if (!profile.noise.is_identity()) {
    Rng noise_rng(Rng::derive_seed(profile.noise.seed, rng.next()));
    auto noised = inject_asr_noise(r.utterance, profile.noise, noise_rng);
    r.noised = noised.altered();
    r.utterance = std::move(noised.text);
  }
  return r;
}

NoisedUtterance inject_asr_noise(std::string_view utterance, const NoiseConfig& noise, Rng& rng) {
  NoisedUtterance out{std::string(utterance), false, 0};
  for (const auto& e : noise.confusion_table) {
    const auto pos = out.text.find(e.phrase);
    if (pos == std::string::npos) continue;
    if (rng.bernoulli(e.probability)) {
      out.text.replace(pos, e.phrase.size(), e.replacement);
      out.substituted = true;
    }
  }
  if (noise.insertion_rate == 0.0 && noise.deletion_rate == 0.0) return out;

  std::string edited;
  edited.reserve(out.text.size());
  for (auto cp : codepoints(out.text)) {
    if (noise.deletion_rate > 0.0 && rng.bernoulli(noise.deletion_rate)) {
      ++out.char_edits;
      continue;
    }
    edited.append(cp);
    if (noise.insertion_rate > 0.0 && rng.bernoulli(noise.insertion_rate)) {
      edited.append(cp);
      ++out.char_edits;
    }
  }
  out.text = std::move(edited);
  return out;
}

std::string_view to_string(TestsetKind k) {
  switch (k) {
    case TestsetKind::effect: return "effect";
    case TestsetKind::general: return "general";
    case TestsetKind::robust: return "robust";
  }
  return "unknown";
}

TestsetKind testset_kind_from_string(std::string_view s) {
  if (s == "effect") return TestsetKind::effect;
  if (s == "general") return TestsetKind::general;
  if (s == "robust") return TestsetKind::robust;
  throw std::invalid_argument("unknown test-set kind '" + std::string(s) + "'");
}

void to_json(json& j, const TestItem& t) {
  j = json{{"state", t.state.str()},
           {"agent_query", t.agent_query},
           {"utterance", t.utterance},
           {"transition", t.transition_index},
           {"variant", t.variant_index},
           {"gold_label", std::string(1, t.gold_label)},
           {"noised", t.noised},
           {"provenance", t.provenance}};
}

void from_json(const json& j, TestItem& t) {
  t.state = StateId(j.at("state").get<std::string>());
  t.agent_query = j.value("agent_query", std::string());
  t.utterance = j.at("utterance").get<std::string>();
  t.transition_index = j.at("transition").get<std::size_t>();
  t.variant_index = j.value("variant", std::size_t{0});
  const auto label = j.at("gold_label").get<std::string>();
  if (label.size() != 1) throw std::invalid_argument("gold_label must be a single letter");
  t.gold_label = label[0];
  t.noised = j.value("noised", false);
  t.provenance = j.value("provenance", json::object());
}

std::size_t variant_length_p90(const FsmGraph& graph) {
  std::vector<std::size_t> lengths;
  for (const auto& t : graph.transitions())
    for (const auto& v : t.reply_variants) lengths.push_back(utf8_length(v.text));
  if (lengths.empty()) return 0;
  std::sort(lengths.begin(), lengths.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(lengths.size())));
  return lengths[std::max<std::size_t>(rank, 1) - 1];
}

namespace {

struct PoolEntry {
  std::size_t transition;
  std::size_t variant;
};

TestItem make_item(const FsmGraph& graph, const PoolEntry& e) {
  const auto& t = graph.transitions()[e.transition];
  const auto label = candidate_options(graph, t.source).label_for_transition(e.transition);
  TestItem item;
  item.state = t.source;
  // Single-turn items: the owner answers the state's own question.
  item.agent_query = graph.state(t.source).query;
  item.utterance = t.reply_variants[e.variant].text;
  item.transition_index = e.transition;
  item.variant_index = e.variant;
  item.gold_label = *label;
  return item;
}

}  // namespace

std::vector<TestItem> build_testset(const FsmGraph& graph, TestsetKind kind, std::size_t n,
                                    Rng& rng, const TestsetOptions& options) {
  if (n == 0) throw std::invalid_argument("build_testset: n must be >= 1");
  std::vector<PoolEntry> pool;
  for (std::size_t ti = 0; ti < graph.transitions().size(); ++ti)
    for (std::size_t vi = 0; vi < graph.transitions()[ti].reply_variants.size(); ++vi)
      pool.push_back({ti, vi});
  if (pool.empty()) throw std::invalid_argument("build_testset: FSM has no transitions");

  std::vector<StateId> speaking;
  for (const auto& s : graph.states())
    if (!graph.outgoing(s.id).empty()) speaking.push_back(s.id);

  std::vector<PoolEntry> long_pool;
  std::size_t min_length = 0;
  if (kind == TestsetKind::robust) {
    check_probability(options.noised_fraction, "noised_fraction");
    options.profile.noise.validate();
    min_length = options.min_length.value_or(variant_length_p90(graph));
    for (const auto& e : pool)
      if (utf8_length(graph.transitions()[e.transition].reply_variants[e.variant].text) >= min_length)
        long_pool.push_back(e);
    if (long_pool.empty())
      throw std::invalid_argument("robust test set: no reply variant reaches length " +
                                  std::to_string(min_length));
  }
  if (kind == TestsetKind::effect) options.profile.validate(graph);

  std::vector<TestItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TestItem item;
    switch (kind) {
      case TestsetKind::general:
        item = make_item(graph, pool[rng.uniform_index(pool.size())]);
        break;
      case TestsetKind::effect: {
        auto empirical = options.profile;
        empirical.mode = ProfileMode::empirical;
        empirical.noise = {};
        const auto& state = speaking[rng.uniform_index(speaking.size())];
        const auto r = respond(empirical, graph, state, rng);
        item = make_item(graph, {r.transition_index, r.variant_index});
        break;
      }
      case TestsetKind::robust: {
        const bool perturb = options.noised_fraction > 0.0 && rng.bernoulli(options.noised_fraction);
        if (perturb) {
          item = make_item(graph, pool[rng.uniform_index(pool.size())]);
          auto noised = inject_asr_noise(item.utterance, options.profile.noise, rng);
          if (noised.altered()) {
            item.utterance = std::move(noised.text);
            item.noised = true;
            break;
          }
        }
        item = make_item(graph, long_pool[rng.uniform_index(long_pool.size())]);
        break;
      }
    }
    item.provenance = json{{"kind", to_string(kind)}, {"index", i}, {"seed", rng.seed()}};
    if (kind == TestsetKind::robust) item.provenance["min_length"] = min_length;
    items.push_back(std::move(item));
  }
  return items;
}

UserReply SimulatedOwner::respond(const FsmGraph& graph, const StateId& state,
                                  std::string_view /*agent_query*/) {
  const auto r = ivrkit::respond(profile_, graph, state, rng_);
  return {r.utterance, r.transition_index};
}

}  // namespace ivrkit
