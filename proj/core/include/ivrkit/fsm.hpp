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

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ivrkit {

/// Identifier of an FSM state (an agent intent / query template).
class StateId {
 public:
  StateId() = default;
  explicit StateId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend auto operator<=>(const StateId&, const StateId&) = default;
  friend bool operator==(const StateId&, const StateId&) = default;

 private:
  std::string value_;
};

struct ReplyVariant {
  std::string text;
  std::optional<double> weight;  // empirical frequency from logs

  double effective_weight() const { return weight.value_or(1.0); }
  friend bool operator==(const ReplyVariant&, const ReplyVariant&) = default;
};

struct Transition {
  StateId source;
  StateId target;
  std::string reply_class;
  std::vector<ReplyVariant> reply_variants;
  // Short intent restatement used in CoT targets ("confirmed the name").
  std::string paraphrase;
  // Overrides the target state's canonical query when this option is emitted.
  std::optional<std::string> agent_query;

  /// Sum of variant weights; the class-level empirical frequency.
  double class_weight() const;
  friend bool operator==(const Transition&, const Transition&) = default;
};

struct StateInfo {
  StateId id;
  std::string query;  // canonical ("original") question asked in this state
  std::string goal;   // attribute this state acquires; empty for none
  friend bool operator==(const StateInfo&, const StateInfo&) = default;
};

struct Option {
  char label = 'A';
  std::string agent_query_text;
  StateId target_state;
  std::size_t transition_index = 0;  // index into FsmGraph::transitions()
};

struct OptionSet {
  StateId state;
  std::vector<Option> options;

  bool empty() const { return options.empty(); }
  std::size_t size() const { return options.size(); }
  bool contains(char label) const;
  const Option* find(char label) const;
  /// Label of the option produced by the given transition, if any.
  std::optional<char> label_for_transition(std::size_t transition_index) const;
  std::string labels() const;
};

/// Machine-readable validation finding. `location` is a JSON pointer into
/// the source document.
struct Diagnostic {
  std::string code;
  std::string location;
  std::string message;
};

class FsmError : public std::runtime_error {
 public:
  explicit FsmError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Validated, immutable dialogue state machine.
class FsmGraph {
 public:
  /// Validates and builds; throws FsmError listing every violation.
  static FsmGraph build(std::string name, std::vector<StateInfo> states, StateId initial,
                        std::vector<StateId> terminals, std::vector<Transition> transitions);

  /// Same checks as build() without throwing.
  static std::vector<Diagnostic> check(const std::vector<StateInfo>& states,
                                       const StateId& initial,
                                       const std::vector<StateId>& terminals,
                                       const std::vector<Transition>& transitions);

  const std::string& name() const { return name_; }
  std::span<const StateInfo> states() const { return states_; }
  const StateId& initial() const { return initial_; }
  std::span<const StateId> terminals() const { return terminals_; }
  std::span<const Transition> transitions() const { return transitions_; }
  const std::vector<std::string>& attribute_goals() const { return goals_; }

  bool contains(const StateId& id) const { return index_.contains(id.str()); }
  bool is_terminal(const StateId& id) const;
  const StateInfo& state(const StateId& id) const;
  /// Indices into transitions() in declaration order.
  const std::vector<std::size_t>& outgoing(const StateId& id) const;
  /// Text the agent speaks when this transition's option is emitted.
  const std::string& option_query(std::size_t transition_index) const;

 private:
  FsmGraph() = default;

  std::size_t state_index(const StateId& id) const;

  std::string name_;
  std::vector<StateInfo> states_;
  StateId initial_;
  std::vector<StateId> terminals_;
  std::vector<Transition> transitions_;
  std::vector<std::string> goals_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> outgoing_;
  std::vector<bool> terminal_flags_;
};

FsmGraph load_fsm(const nlohmann::json& document);
FsmGraph load_fsm_file(const std::filesystem::path& path);
/// Diagnostics for a document without throwing (parse-level problems included).
std::vector<Diagnostic> validate_fsm_document(const nlohmann::json& document);
nlohmann::json serialize_fsm(const FsmGraph& graph);

OptionSet candidate_options(const FsmGraph& graph, const StateId& state);

using Path = std::vector<StateId>;
/// Paths keyed by number of states.
using PathGroups = std::map<std::size_t, std::vector<Path>>;

/// All initial-to-terminal state sequences with at most max_length states.
PathGroups enumerate_paths(const FsmGraph& graph, std::size_t max_length);

/// Label for the i-th option (0 -> 'A').
inline char option_label(std::size_t index) { return static_cast<char>('A' + index); }

inline constexpr std::size_t kMaxOptions = 26;

}  // namespace ivrkit

template <>
struct std::hash<ivrkit::StateId> {
  std::size_t operator()(const ivrkit::StateId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
