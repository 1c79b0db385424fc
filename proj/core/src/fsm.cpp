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

#include "ivrkit/fsm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ivrkit {

using json = nlohmann::json;

namespace {

std::string summarize(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream out;
  out << "invalid FSM";
  for (const auto& d : diagnostics) out << "; " << d.location << ": " << d.message;
  return out.str();
}

std::string pointer(std::string_view base, std::size_t index) {
  return std::string(base) + "/" + std::to_string(index);
}

}  // namespace

double Transition::class_weight() const {
  double total = 0.0;
  for (const auto& v : reply_variants) total += v.effective_weight();
  return total;
}

bool OptionSet::contains(char label) const { return find(label) != nullptr; }

const Option* OptionSet::find(char label) const {
  for (const auto& o : options)
    if (o.label == label) return &o;
  return nullptr;
}

std::optional<char> OptionSet::label_for_transition(std::size_t transition_index) const {
  for (const auto& o : options)
    if (o.transition_index == transition_index) return o.label;
  return std::nullopt;
}

std::string OptionSet::labels() const {
  std::string out;
  for (const auto& o : options) out.push_back(o.label);
  return out;
}

FsmError::FsmError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::vector<Diagnostic> FsmGraph::check(const std::vector<StateInfo>& states,
                                        const StateId& initial,
                                        const std::vector<StateId>& terminals,
                                        const std::vector<Transition>& transitions) {
  std::vector<Diagnostic> out;
  if (states.empty()) {
    out.push_back({"no_states", "/states", "no states"});
    return out;
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& id = states[i].id.str();
    if (id.empty()) {
      out.push_back({"empty_state_id", pointer("/states", i), "state id is empty"});
      continue;
    }
    if (!index.emplace(id, i).second)
      out.push_back({"duplicate_state", pointer("/states", i), "duplicate state '" + id + "'"});
  }

  auto known = [&](const StateId& s) { return index.contains(s.str()); };

  if (!known(initial))
    out.push_back({"unknown_state", "/initial", "unknown state '" + initial.str() + "'"});

  std::set<std::string> terminal_set;
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    if (!known(terminals[i]))
      out.push_back({"unknown_state", pointer("/terminals", i),
                     "unknown state '" + terminals[i].str() + "'"});
    terminal_set.insert(terminals[i].str());
  }

  std::vector<std::size_t> out_degree(states.size(), 0);
  std::set<std::pair<std::string, std::string>> classes;
  std::vector<std::vector<std::size_t>> adjacency(states.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    const auto loc = pointer("/transitions", i);
    bool endpoints_ok = true;
    if (!known(t.source)) {
      out.push_back({"unknown_state", loc + "/source", "unknown state '" + t.source.str() + "'"});
      endpoints_ok = false;
    }
    if (!known(t.target)) {
      out.push_back({"unknown_state", loc + "/target", "unknown state '" + t.target.str() + "'"});
      endpoints_ok = false;
    }
    if (t.reply_class.empty())
      out.push_back({"empty_reply_class", loc + "/reply_class", "reply_class is empty"});
    if (t.reply_variants.empty())
      out.push_back({"no_variants", loc + "/reply_variants", "reply_variants is empty"});
    for (std::size_t j = 0; j < t.reply_variants.size(); ++j) {
      const auto& w = t.reply_variants[j].weight;
      if (w && !(std::isfinite(*w) && *w > 0.0))
        out.push_back({"bad_weight", pointer(loc + "/reply_variants", j) + "/weight",
                       "variant weight must be strictly positive"});
    }
    if (!classes.emplace(t.source.str(), t.reply_class).second)
      out.push_back({"duplicate_reply_class", loc + "/reply_class",
                     "duplicate reply_class '" + t.reply_class + "' on state '" +
                         t.source.str() + "'"});
    if (terminal_set.contains(t.source.str()))
      out.push_back({"terminal_has_outgoing", loc,
                     "terminal state '" + t.source.str() + "' has an outgoing transition"});
    if (endpoints_ok) {
      const auto s = index.at(t.source.str());
      ++out_degree[s];
      adjacency[s].push_back(index.at(t.target.str()));
    }
  }

  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& id = states[i].id.str();
    if (terminal_set.contains(id)) continue;
    if (out_degree[i] == 0)
      out.push_back({"dead_end", pointer("/states", i),
                     "non-terminal state '" + id + "' has no outgoing transition"});
    if (out_degree[i] > kMaxOptions)
      out.push_back({"too_many_options", pointer("/states", i),
                     "state '" + id + "' has more than 26 outgoing transitions"});
  }

  if (known(initial)) {
    std::vector<bool> seen(states.size(), false);
    std::deque<std::size_t> queue{index.at(initial.str())};
    seen[queue.front()] = true;
    while (!queue.empty()) {
      const auto s = queue.front();
      queue.pop_front();
      for (auto n : adjacency[s])
        if (!seen[n]) {
          seen[n] = true;
          queue.push_back(n);
        }
    }
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto it = index.find(states[i].id.str());
      if (it == index.end() || it->second != i) continue;
      if (!seen[i])
        out.push_back({"unreachable", pointer("/states", i),
                       "state '" + states[i].id.str() + "' is unreachable from '" +
                           initial.str() + "'"});
    }
  }
  return out;
}

FsmGraph FsmGraph::build(std::string name, std::vector<StateInfo> states, StateId initial,
                         std::vector<StateId> terminals, std::vector<Transition> transitions) {
  auto diagnostics = check(states, initial, terminals, transitions);
  if (!diagnostics.empty()) throw FsmError(std::move(diagnostics));

  FsmGraph g;
  g.name_ = std::move(name);
  g.states_ = std::move(states);
  g.initial_ = std::move(initial);
  g.terminals_ = std::move(terminals);
  g.transitions_ = std::move(transitions);
  for (std::size_t i = 0; i < g.states_.size(); ++i) g.index_.emplace(g.states_[i].id.str(), i);
  g.outgoing_.resize(g.states_.size());
  g.terminal_flags_.assign(g.states_.size(), false);
  for (const auto& t : g.terminals_) g.terminal_flags_[g.index_.at(t.str())] = true;
  for (std::size_t i = 0; i < g.transitions_.size(); ++i)
    g.outgoing_[g.index_.at(g.transitions_[i].source.str())].push_back(i);
  for (const auto& s : g.states_)
    if (!s.goal.empty() && std::find(g.goals_.begin(), g.goals_.end(), s.goal) == g.goals_.end())
      g.goals_.push_back(s.goal);
  return g;
}

std::size_t FsmGraph::state_index(const StateId& id) const {
  const auto it = index_.find(id.str());
  if (it == index_.end()) throw std::out_of_range("unknown state '" + id.str() + "'");
  return it->second;
}

bool FsmGraph::is_terminal(const StateId& id) const { return terminal_flags_[state_index(id)]; }

const StateInfo& FsmGraph::state(const StateId& id) const { return states_[state_index(id)]; }

const std::vector<std::size_t>& FsmGraph::outgoing(const StateId& id) const {
  return outgoing_[state_index(id)];
}

const std::string& FsmGraph::option_query(std::size_t transition_index) const {
  const auto& t = transitions_.at(transition_index);
  if (t.agent_query) return *t.agent_query;
  return state(t.target).query;
}

namespace {

// Collects schema problems instead of throwing so `fsm validate` can report
// everything in one pass.
struct Reader {
  std::vector<Diagnostic> problems;

  void fail(std::string location, std::string message) {
    problems.push_back({"schema", std::move(location), std::move(message)});
  }

  std::string string_field(const json& obj, const char* key, const std::string& loc,
                           bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(loc + "/" + key, std::string("missing field '") + key + "'");
      return {};
    }
    if (!it->is_string()) {
      fail(loc + "/" + key, std::string("field '") + key + "' must be a string");
      return {};
    }
    return it->get<std::string>();
  }
};

struct Parsed {
  std::string name;
  std::vector<StateInfo> states;
  StateId initial;
  std::vector<StateId> terminals;
  std::vector<Transition> transitions;
};

Parsed parse_document(const json& doc, Reader& r) {
  Parsed p;
  if (!doc.is_object()) {
    r.fail("", "document must be a JSON object");
    return p;
  }
  p.name = r.string_field(doc, "name", "", false);

  const auto states = doc.find("states");
  if (states == doc.end() || !states->is_array()) {
    r.fail("/states", "missing array 'states'");
  } else {
    for (std::size_t i = 0; i < states->size(); ++i) {
      const auto& s = (*states)[i];
      const auto loc = pointer("/states", i);
      StateInfo info;
      if (s.is_string()) {
        info.id = StateId(s.get<std::string>());
      } else if (s.is_object()) {
        info.id = StateId(r.string_field(s, "id", loc, true));
        info.query = r.string_field(s, "query", loc, false);
        info.goal = r.string_field(s, "goal", loc, false);
      } else {
        r.fail(loc, "state must be a string or an object");
        continue;
      }
      p.states.push_back(std::move(info));
    }
  }

  p.initial = StateId(r.string_field(doc, "initial", "", true));

  const auto terminals = doc.find("terminals");
  if (terminals == doc.end() || !terminals->is_array()) {
    r.fail("/terminals", "missing array 'terminals'");
  } else {
    for (std::size_t i = 0; i < terminals->size(); ++i) {
      if (!(*terminals)[i].is_string()) {
        r.fail(pointer("/terminals", i), "terminal must be a string");
        continue;
      }
      p.terminals.emplace_back((*terminals)[i].get<std::string>());
    }
  }

  const auto transitions = doc.find("transitions");
  if (transitions == doc.end() || !transitions->is_array()) {
    r.fail("/transitions", "missing array 'transitions'");
    return p;
  }
  for (std::size_t i = 0; i < transitions->size(); ++i) {
    const auto& t = (*transitions)[i];
    const auto loc = pointer("/transitions", i);
    if (!t.is_object()) {
      r.fail(loc, "transition must be an object");
      continue;
    }
    Transition tr;
    tr.source = StateId(r.string_field(t, "source", loc, true));
    tr.target = StateId(r.string_field(t, "target", loc, true));
    tr.reply_class = r.string_field(t, "reply_class", loc, true);
    tr.paraphrase = r.string_field(t, "paraphrase", loc, false);
    if (t.contains("agent_query")) tr.agent_query = r.string_field(t, "agent_query", loc, false);
    const auto variants = t.find("reply_variants");
    if (variants == t.end() || !variants->is_array()) {
      r.fail(loc + "/reply_variants", "missing array 'reply_variants'");
    } else {
      for (std::size_t j = 0; j < variants->size(); ++j) {
        const auto& v = (*variants)[j];
        const auto vloc = pointer(loc + "/reply_variants", j);
        if (v.is_string()) {
          tr.reply_variants.push_back({v.get<std::string>(), std::nullopt});
        } else if (v.is_object()) {
          ReplyVariant rv{r.string_field(v, "text", vloc, true), std::nullopt};
          if (const auto w = v.find("weight"); w != v.end()) {
            if (w->is_number())
              rv.weight = w->get<double>();
            else
              r.fail(vloc + "/weight", "weight must be a number");
          }
          tr.reply_variants.push_back(std::move(rv));
        } else {
          r.fail(vloc, "variant must be a string or an object");
        }
      }
    }
    p.transitions.push_back(std::move(tr));
  }
  return p;
}

}  // namespace

std::vector<Diagnostic> validate_fsm_document(const json& document) {
  Reader r;
  auto p = parse_document(document, r);
  if (!r.problems.empty()) return r.problems;
  return FsmGraph::check(p.states, p.initial, p.terminals, p.transitions);
}

FsmGraph load_fsm(const json& document) {
  Reader r;
  auto p = parse_document(document, r);
  if (!r.problems.empty()) throw FsmError(std::move(r.problems));
  return FsmGraph::build(std::move(p.name), std::move(p.states), std::move(p.initial),
                         std::move(p.terminals), std::move(p.transitions));
}

FsmGraph load_fsm_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open FSM file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FsmError({{"parse", "", e.what()}});
  }
  return load_fsm(doc);
}

json serialize_fsm(const FsmGraph& graph) {
  json doc;
  if (!graph.name().empty()) doc["name"] = graph.name();
  doc["states"] = json::array();
  for (const auto& s : graph.states()) {
    json js{{"id", s.id.str()}};
    if (!s.query.empty()) js["query"] = s.query;
    if (!s.goal.empty()) js["goal"] = s.goal;
    doc["states"].push_back(std::move(js));
  }
  doc["initial"] = graph.initial().str();
  doc["terminals"] = json::array();
  for (const auto& t : graph.terminals()) doc["terminals"].push_back(t.str());
  doc["transitions"] = json::array();
  for (const auto& t : graph.transitions()) {
    json jt{{"source", t.source.str()}, {"target", t.target.str()}, {"reply_class", t.reply_class}};
    if (!t.paraphrase.empty()) jt["paraphrase"] = t.paraphrase;
    if (t.agent_query) jt["agent_query"] = *t.agent_query;
    jt["reply_variants"] = json::array();
    for (const auto& v : t.reply_variants) {
      if (v.weight)
        jt["reply_variants"].push_back({{"text", v.text}, {"weight", *v.weight}});
      else
        jt["reply_variants"].push_back(v.text);
    }
    doc["transitions"].push_back(std::move(jt));
  }
  return doc;
}

OptionSet candidate_options(const FsmGraph& graph, const StateId& state) {
  if (!graph.contains(state)) throw std::out_of_range("unknown state '" + state.str() + "'");
  OptionSet set{state, {}};
  const auto& out = graph.outgoing(state);
  set.options.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& t = graph.transitions()[out[i]];
    set.options.push_back({option_label(i), graph.option_query(out[i]), t.target, out[i]});
  }
  return set;
}

PathGroups enumerate_paths(const FsmGraph& graph, std::size_t max_length) {
  if (max_length == 0) throw std::invalid_argument("enumerate_paths: max_length must be >= 1");
  PathGroups groups;
  Path current{graph.initial()};

  // Distinct successor states in declaration order; parallel transitions to
  // the same target yield the same state path.
  auto successors = [&](const StateId& s) {
    std::vector<StateId> next;
    for (auto ti : graph.outgoing(s)) {
      const auto& target = graph.transitions()[ti].target;
      if (std::find(next.begin(), next.end(), target) == next.end()) next.push_back(target);
    }
    return next;
  };

  std::function<void()> walk = [&] {
    const auto& tail = current.back();
    if (graph.is_terminal(tail)) {
      groups[current.size()].push_back(current);
      return;
    }
    if (current.size() == max_length) return;
    for (const auto& next : successors(tail)) {
      current.push_back(next);
      walk();
      current.pop_back();
    }
  };
  walk();
  return groups;
}

}  // namespace ivrkit
