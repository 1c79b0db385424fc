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

#include "ivrkit/prompt.hpp"

#include <stdexcept>

namespace ivrkit {

bool is_known_template(std::string_view version) { return version == kTemplateV1; }

namespace {

void require_template(std::string_view version) {
  if (!is_known_template(version))
    throw std::invalid_argument("unknown template version '" + std::string(version) + "'");
}

}  // namespace

std::string render_selection_prompt(HistoryView history, const OptionSet& options,
                                    std::string_view template_version) {
  require_template(template_version);
  std::string out;
  out.reserve(256 + 64 * (history.size() + options.size()));
  out += "[Task] You are a phone agent confirming point-of-interest information with its "
         "owner. Read the conversation and choose the next agent query from the reply "
         "options.\n";
  out += "[Conversation]\n";
  if (history.empty()) out += "(call opened, no owner reply yet)\n";
  for (const auto& [query, reply] : history) {
    out += "Agent: ";
    out += query;
    out += "\nUser: ";
    out += reply;
    out += '\n';
  }
  out += "[Reply Options]\n";
  for (const auto& o : options.options) {
    out += o.label;
    out += ". ";
    out += o.agent_query_text;
    out += '\n';
  }
  out += "[Output] State the user's intent in one sentence, then give the letter of the "
         "chosen option on its own.\n";
  return out;
}

std::string render_cot(const FsmGraph& graph, std::size_t transition_index,
                       std::string_view template_version) {
  require_template(template_version);
  const auto& t = graph.transitions()[transition_index];
  const std::string intent =
      t.paraphrase.empty() ? "classified as " + t.reply_class : t.paraphrase;
  const auto& target = graph.state(t.target);
  std::string goal = target.goal;
  if (goal.empty()) goal = graph.is_terminal(t.target) ? "closing the call" : "continuing the call";
  return "User's reply " + intent + "; next goal is " + goal + ".";
}

std::string render_output(std::string_view cot, char label) {
  std::string out(cot);
  if (!out.empty()) out += ' ';
  out += label;
  return out;
}

std::string render_eval_prompt(std::string_view selection_prompt, std::string_view output) {
  std::string out;
  out.reserve(selection_prompt.size() + output.size() + 160);
  out += "[Evaluation] Judge whether the response below is the correct choice for this "
         "dialogue. Answer True or False.\n";
  out += selection_prompt;
  out += "[Response]\n";
  out += output;
  out += "\n[Verdict]\n";
  return out;
}

}  // namespace ivrkit
