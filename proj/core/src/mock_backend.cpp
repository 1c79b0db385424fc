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

#include "ivrkit/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <thread>

#include "ivrkit/prompt.hpp"
#include "ivrkit/prompt_store.hpp"

namespace ivrkit {

using json = nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string normalize(std::string_view s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      if (space && !out.empty()) out += ' ';
      out += static_cast<char>(std::tolower(c));
      space = false;
    } else {
      space = true;
    }
  }
  return out;
}

std::set<std::string> word_set(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : whitespace_tokens(normalize(s))) out.insert(std::move(w));
  return out;
}

std::pair<double, double> pair_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [g0, g1]");
  return {j[0].get<double>(), j[1].get<double>()};
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return normalize(haystack).find(normalize(needle)) != std::string::npos;
}

}  // namespace

RoundSchedule RoundSchedule::from_json(const json& j, double fallback) {
  if (j.is_null()) return RoundSchedule({fallback});
  if (j.is_number()) return RoundSchedule({j.get<double>()});
  return RoundSchedule(j.get<std::vector<double>>());
}

double RoundSchedule::at(int round) const {
  if (values_.empty()) return 0.0;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(round, 0)), values_.size() - 1);
  return values_[i];
}

std::size_t classify_reply(const FsmGraph& graph, const StateId& state, std::string_view reply) {
  const auto& out = graph.outgoing(state);
  if (out.empty()) throw std::invalid_argument("state '" + state.str() + "' has no options");
  const auto norm = normalize(reply);
  for (auto ti : out)
    for (const auto& v : graph.transitions()[ti].reply_variants)
      if (normalize(v.text) == norm) return ti;

  const auto words = word_set(reply);
  std::size_t best = out.front();
  double best_score = -1.0;
  for (auto ti : out) {
    for (const auto& v : graph.transitions()[ti].reply_variants) {
      const auto vw = word_set(v.text);
      std::size_t common = 0;
      for (const auto& w : vw) common += words.count(w);
      const auto uni = words.size() + vw.size() - common;
      const double score = uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
      if (score > best_score) {
        best_score = score;
        best = ti;
      }
    }
  }
  return best;
}

MockBackend::MockBackend(BackendProfile profile, std::shared_ptr<const FsmGraph> graph)
    : profile_(std::move(profile)), graph_(std::move(graph)), sequential_(profile_.seed) {
  const json cfg = profile_.mock.is_null() ? json::object() : profile_.mock;
  latency_ms_ = cfg.value("latency_ms", 0);

  policy_mode_ = cfg.value("mode", std::string("oracle"));
  if (cfg.contains("script")) script_ = cfg.at("script").get<std::map<std::string, std::string>>();
  fixed_ = cfg.value("fixed", std::string());
  error_rate_ = RoundSchedule::from_json(cfg.value("error_rate", json()), 0.0);
  invalid_rate_ = RoundSchedule::from_json(cfg.value("invalid_rate", json()), 0.0);

  if (cfg.contains("probs")) probs_ = cfg.at("probs").get<std::vector<double>>();
  token_prob_ = cfg.value("token_prob", token_prob_);
  if (cfg.contains("logits")) logits_ = pair_from(cfg.at("logits"));
  if (cfg.contains("probability")) probability_ = cfg.at("probability").get<double>();
  if (cfg.contains("scripted")) {
    const auto& s = cfg.at("scripted");
    scripted_.enabled = true;
    scripted_.p_correct = s.value("p_correct", scripted_.p_correct);
    scripted_.p_incorrect = s.value("p_incorrect", scripted_.p_incorrect);
    if (s.contains("logits_correct")) scripted_.logits_correct = pair_from(s.at("logits_correct"));
    if (s.contains("logits_incorrect"))
      scripted_.logits_incorrect = pair_from(s.at("logits_incorrect"));
    scripted_.flip_rate = RoundSchedule::from_json(s.value("flip_rate", json()), 0.0);
    scripted_.flip_every = RoundSchedule::from_json(s.value("flip_every", json()), 0.0);
  }

  if (profile_.role == Role::judge) judge_mode_ = cfg.value("mode", std::string("scripted"));
  judge_text_ = cfg.value("text", std::string());
  judge_flip_rate_ = RoundSchedule::from_json(cfg.value("flip_rate", json()), 0.0);
  judge_flip_every_ = RoundSchedule::from_json(cfg.value("flip_every", json()), 0.0);
  uncertain_rate_ = RoundSchedule::from_json(cfg.value("uncertain_rate", json()), 0.0);
  if (cfg.contains("criteria_triggers"))
    criteria_triggers_ =
        cfg.at("criteria_triggers").get<std::map<std::string, std::vector<std::string>>>();
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

Rng MockBackend::request_rng(const RequestHints& hints, std::uint64_t salt) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (!hints.sample_id.empty())
    return Rng(Rng::derive_seed(profile_.seed, fnv1a(hints.sample_id) ^ salt));
  return Rng(sequential_.next());
}

void MockBackend::simulate_latency() const {
  if (latency_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
}

bool MockBackend::flipped(const RequestHints& hints, const RoundSchedule& rate,
                          const RoundSchedule& every, std::uint64_t salt) {
  if (const auto k = static_cast<std::size_t>(every.at(hints.round)); k > 0)
    return (hints.sample_index + 1) % k == 0;
  const double r = rate.at(hints.round);
  if (r <= 0.0) return false;
  return request_rng(hints, salt).bernoulli(r);
}

bool MockBackend::sample_is_correct(const RequestHints& hints) const {
  if (!hints.chosen_label) return false;
  if (!hints.gold_label) return true;
  return *hints.chosen_label == *hints.gold_label;
}

std::string MockBackend::complete(const Request& request) {
  simulate_latency();
  if (profile_.role == Role::judge) return judge_output(request);
  return policy_output(request);
}

std::string MockBackend::policy_output(const Request& request) {
  const auto& h = request.hints;
  if (auto it = script_.find(h.state); it != script_.end()) {
    request_rng(h, 0);
    return it->second;
  }
  if (policy_mode_ == "fixed") {
    request_rng(h, 0);
    return fixed_;
  }
  if (!graph_) throw GatewayError(GatewayError::Kind::invalid_request, "oracle policy needs an FSM");
  const StateId state(h.state);
  if (!graph_->contains(state))
    throw GatewayError(GatewayError::Kind::invalid_request, "unknown state '" + h.state + "'");
  const auto options = candidate_options(*graph_, state);
  if (options.empty())
    throw GatewayError(GatewayError::Kind::invalid_request, "terminal state has no options");

  const auto truth = classify_reply(*graph_, state, h.last_user_reply);
  const auto cot = render_cot(*graph_, truth, kTemplateV1);
  auto rng = request_rng(h, 0x706f6c);
  const double u = rng.uniform01();
  const double invalid = invalid_rate_.at(h.round);
  const double error = error_rate_.at(h.round);
  if (u < invalid) {
    // Out-of-set letter, or no letter at all.
    if (options.size() < kMaxOptions && rng.bernoulli(0.8))
      return render_output(cot, option_label(options.size() + rng.uniform_index(
                                                                  kMaxOptions - options.size())));
    return cot + " (no option applies)";
  }
  char label = *options.label_for_transition(truth);
  if (u < invalid + error && options.size() > 1) {
    auto pick = rng.uniform_index(options.size() - 1);
    const auto truth_pos = static_cast<std::size_t>(label - 'A');
    if (pick >= truth_pos) ++pick;
    label = option_label(pick);
  }
  return render_output(cot, label);
}

std::string MockBackend::judge_output(const Request& request) {
  const auto& h = request.hints;
  if (judge_mode_ == "always_correct") return "VERDICT: correct\nscripted judge";
  if (judge_mode_ == "always_incorrect") return "VERDICT: incorrect\nscripted judge";
  if (judge_mode_ == "text") return judge_text_;

  for (const auto& criterion : extract_criteria(request.prompt)) {
    const auto it = criteria_triggers_.find(criterion);
    if (it == criteria_triggers_.end() || h.chosen_ends_call) continue;
    for (const auto& phrase : it->second)
      if (contains_ci(h.last_user_reply, phrase))
        return "VERDICT: incorrect\nthe owner " + criterion + " but the agent keeps the call going";
  }

  if (uncertain_rate_.at(h.round) > 0.0 &&
      request_rng(h, 0x756e63).bernoulli(uncertain_rate_.at(h.round)))
    return "VERDICT: uncertain\nreply is ambiguous";
  bool correct = sample_is_correct(h);
  if (flipped(h, judge_flip_rate_, judge_flip_every_, 0x6a6466)) correct = !correct;
  return correct ? "VERDICT: correct\nchoice matches the owner's intent"
                 : "VERDICT: incorrect\nchoice does not match the owner's intent";
}

std::vector<TokenScore> MockBackend::score(const Request& request, std::string_view target) {
  simulate_latency();
  const auto tokens = whitespace_tokens(target);
  std::vector<TokenScore> out;
  out.reserve(tokens.size());
  if (probs_) {
    request_rng(request.hints, 0);
    if (probs_->size() != tokens.size())
      throw GatewayError(GatewayError::Kind::malformed,
                         "mock has " + std::to_string(probs_->size()) + " probabilities for " +
                             std::to_string(tokens.size()) + " tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({tokens[i], (*probs_)[i]});
    return out;
  }
  double p = token_prob_;
  if (scripted_.enabled) {
    bool correct = sample_is_correct(request.hints);
    if (flipped(request.hints, scripted_.flip_rate, scripted_.flip_every, 0x65766c)) correct = !correct;
    p = correct ? scripted_.p_correct : scripted_.p_incorrect;
  } else {
    request_rng(request.hints, 0);
  }
  for (const auto& t : tokens) out.push_back({t, p});
  return out;
}

JudgeScores MockBackend::judge(const Request& request) {
  simulate_latency();
  if (logits_) return {logits_, std::nullopt};
  if (probability_) return {std::nullopt, probability_};
  if (scripted_.enabled) {
    bool correct = sample_is_correct(request.hints);
    if (flipped(request.hints, scripted_.flip_rate, scripted_.flip_every, 0x65766c)) correct = !correct;
    return {correct ? scripted_.logits_correct : scripted_.logits_incorrect, std::nullopt};
  }
  return {std::pair{0.0, 0.0}, std::nullopt};
}

}  // namespace ivrkit
