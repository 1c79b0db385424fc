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

#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "ivrkit/fsm.hpp"

namespace ivrkit {

/// (agent query, owner reply) pairs, oldest first.
using HistoryView = std::span<const std::pair<std::string, std::string>>;

inline constexpr std::string_view kTemplateV1 = "v1";

bool is_known_template(std::string_view version);

/// Selective-generation prompt: task header, conversation, lettered reply
/// options and the output-format instruction. Throws std::invalid_argument
/// for unknown template versions.
std::string render_selection_prompt(HistoryView history, const OptionSet& options,
                                    std::string_view template_version);

/// One-sentence reasoning target for taking `transition_index`:
/// "User's reply <paraphrase>; next goal is <attribute>."
std::string render_cot(const FsmGraph& graph, std::size_t transition_index,
                       std::string_view template_version);

/// Model output text Y: reasoning followed by the option letter.
std::string render_output(std::string_view cot, char label);

/// Evaluation prompt X_e wrapping a selection prompt and a candidate output.
std::string render_eval_prompt(std::string_view selection_prompt, std::string_view output);

}  // namespace ivrkit
