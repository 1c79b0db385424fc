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

#include "ivrkit/loop.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "ivrkit/jsonl.hpp"
#include "ivrkit/prompt.hpp"
#include "ivrkit/report.hpp"

namespace ivrkit {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::accepted: return "accepted";
    case Partition::rejected: return "rejected";
    case Partition::human_queue: return "human_queue";
  }
  return "unknown";
}

Partition partition_of(const RoutingDecision& routing) {
  switch (routing.kind) {
    case RoutingKind::auto_accept: return Partition::accepted;
    case RoutingKind::auto_reject: return Partition::rejected;
    case RoutingKind::human_review: return Partition::human_queue;
  }
  return Partition::human_queue;
}

Partition ScoredSample::resolved() const {
  if (routed != Partition::human_queue) return routed;
  if (!verdict) return Partition::human_queue;
  return verdict->kind == VerdictKind::reject ? Partition::rejected : Partition::accepted;
}

std::size_t GrowBatch::count(Partition p) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [p](const ScoredSample& s) { return s.routed == p; }));
}

std::size_t GrowBatch::pending() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const ScoredSample& s) {
    return s.resolved() == Partition::human_queue;
  }));
}

std::string score_key(const GenerationRecord& record) {
  std::string key = record.prompt_text;
  key += '\x1f';
  if (record.parsed_label) key += *record.parsed_label;
  return key;
}

ScoreCache score_cache(const GrowBatch& batch) {
  ScoreCache cache;
  for (const auto& s : batch.samples)
    if (s.record.valid) cache[score_key(s.record)] = s.report.c;
  return cache;
}

namespace {

constexpr std::uint64_t kGrowStream = 0x67726f7700000000ULL;
constexpr std::uint64_t kPairStream = 0x7061697200000000ULL;
constexpr std::size_t kAugmentationSample = 2000;

ConfidenceReport unscored_report(const GenerationRecord& record, double alpha) {
  ConfidenceReport r;
  r.sample_id = record.sample_id;
  r.p_gen = 0.0;
  r.p_disc = 0.0;
  r.alpha = alpha;
  r.c = 0.0;
  r.judge = {JudgeLabel::uncertain, "not scored: invalid output", ""};
  r.routing = {RoutingKind::auto_reject, RoutingReason::invalid_output};
  return r;
}

std::string session_id(int round, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r%d-s%05zu", round, i);
  return buf;
}

}  // namespace

GrowBatch grow(const GrowInputs& in, int round, std::size_t n) {
  if (n == 0) throw std::invalid_argument("grow: n must be >= 1");
  if (!in.graph || !in.policy || !in.ensemble) throw std::invalid_argument("grow: incomplete inputs");

  GrowBatch batch;
  batch.round = round;
  const auto round_rng = Rng(in.master_seed).split(kGrowStream + static_cast<std::uint64_t>(round));
  std::size_t index = 0;  // round-local record index

  for (std::size_t i = 0; i < n && !batch.aborted; ++i) {
    SimulatedOwner owner(in.profile, round_rng.split(i));
    StepContext ctx{in.template_version, round, index};
    auto result = run_session(in.graph, *in.policy, owner, in.turn_budget, ctx, session_id(round, i));
    batch.transcripts.push_back(std::move(result.transcript));

    for (auto& record : result.records) {
      ScoredSample s;
      if (!record.valid) {
        s.report = unscored_report(record, in.ensemble->config().alpha);
      } else {
        std::optional<double> previous;
        if (in.previous)
          if (auto it = in.previous->find(score_key(record)); it != in.previous->end())
            previous = it->second;
        try {
          s.report = in.ensemble->evaluate(record, index, previous);
        } catch (const GatewayError& e) {
          batch.aborted = true;
          batch.abort_reason = std::string("scoring ") + record.sample_id + ": " + e.what();
          spdlog::error("grow round {} aborted: {}", round, batch.abort_reason);
          break;
        }
      }
      s.routed = partition_of(s.report.routing);
      s.record = std::move(record);
      batch.samples.push_back(std::move(s));
      ++index;
    }
  }
  return batch;
}

void ingest_verdicts(GrowBatch& batch, std::span<const ReviewVerdict> verdicts) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) index[batch.samples[i].record.sample_id] = i;

  // Validate everything before touching the batch.
  for (const auto& v : verdicts) {
    const auto it = index.find(v.sample_id);
    if (it == index.end()) throw std::invalid_argument("verdict for unknown sample '" + v.sample_id + "'");
    const auto& s = batch.samples[it->second];
    if (s.routed != Partition::human_queue)
      throw std::invalid_argument("verdict for sample '" + v.sample_id + "' which was not queued");
    ReviewItem probe;
    probe.sample_id = v.sample_id;
    probe.record = s.record;
    validate_verdict(v, probe);
  }

  for (const auto& v : verdicts) {
    auto& s = batch.samples[index.at(v.sample_id)];
    if (s.verdict) {
      batch.audit.push_back(json{{"sample_id", v.sample_id}, {"superseded", *s.verdict}, {"by", v}});
      spdlog::info("verdict for {} superseded (last write wins)", v.sample_id);
    }
    s.verdict = v;
    batch.applied_verdicts.push_back(v);
  }
}

json to_json(const IterationMetrics& m) {
  json j;
  j["human_judge_ratio"] = m.human_judge_ratio ? json(m.human_judge_ratio->value()) : json(nullptr);
  j["human_judge_count"] =
      m.human_judge_ratio ? json{m.human_judge_ratio->numerator, m.human_judge_ratio->denominator}
                          : json(nullptr);
  j["evaluation_error_rate"] = m.evaluation_error_rate ? json(*m.evaluation_error_rate) : json(nullptr);
  j["avg_score"] = m.avg_score ? json(*m.avg_score) : json(nullptr);
  return j;
}

IterationMetrics iteration_metrics(const GrowBatch& batch, bool use_gold) {
  IterationMetrics m;
  if (batch.samples.empty()) return m;
  m.human_judge_ratio = Ratio{batch.count(Partition::human_queue), batch.samples.size()};

  double sum = 0.0;
  std::size_t scored = 0;
  std::vector<RoutingDecision> decisions;
  std::vector<GoldDecision> gold;
  for (const auto& s : batch.samples) {
    if (s.record.valid) {
      sum += s.report.c;
      ++scored;
    }
    if (use_gold && s.record.gold_label) {
      decisions.push_back(s.report.routing);
      const bool right = s.record.valid && s.record.parsed_label == s.record.gold_label;
      gold.push_back(right ? GoldDecision::accept : GoldDecision::reject);
    }
  }
  if (scored > 0) m.avg_score = sum / static_cast<double>(scored);
  if (!decisions.empty()) m.evaluation_error_rate = evaluation_error_rate(decisions, gold);
  return m;
}

json to_json(const IterationManifest& m) {
  json j;
  j["round"] = m.round;
  j["policy_id"] = m.policy_id;
  j["thresholds"] = {{"t_hi", m.thresholds.t_hi}, {"t_lo", m.thresholds.t_lo}};
  j["alpha"] = m.alpha;
  j["score_jump"] = m.score_jump;
  j["dataset_refs"] = {{"grow_raw", m.dataset_refs.grow_raw},
                       {"human_queue", m.dataset_refs.human_queue},
                       {"verdicts", m.dataset_refs.verdicts},
                       {"grow_accepted", m.dataset_refs.grow_accepted},
                       {"eval_pairs", m.dataset_refs.eval_pairs}};
  j["judge_prompt_version"] = m.judge_prompt_version;
  j["master_seed"] = m.master_seed;
  j["sessions"] = m.sessions;
  j["metrics"] = to_json(m.metrics);
  j["counts"] = m.counts;
  j["session_metrics"] = m.session_metrics;
  j["prompt_revised_to"] = m.prompt_revised_to ? json(*m.prompt_revised_to) : json(nullptr);
  j["partial"] = m.partial;
  return j;
}

IterationManifest manifest_from_json(const json& j) {
  IterationManifest m;
  m.round = j.at("round").get<int>();
  m.policy_id = j.at("policy_id").get<std::string>();
  m.thresholds.t_hi = j.at("thresholds").at("t_hi").get<double>();
  m.thresholds.t_lo = j.at("thresholds").at("t_lo").get<double>();
  m.alpha = j.at("alpha").get<double>();
  m.score_jump = j.value("score_jump", kDefaultScoreJump);
  const auto& refs = j.at("dataset_refs");
  m.dataset_refs = {refs.at("grow_raw").get<std::string>(), refs.at("human_queue").get<std::string>(),
                    refs.at("verdicts").get<std::string>(), refs.at("grow_accepted").get<std::string>(),
                    refs.at("eval_pairs").get<std::string>()};
  m.judge_prompt_version = j.at("judge_prompt_version").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.sessions = j.value("sessions", std::size_t{0});
  const auto& met = j.at("metrics");
  if (!met.at("human_judge_count").is_null())
    m.metrics.human_judge_ratio = Ratio{met.at("human_judge_count")[0].get<std::size_t>(),
                                        met.at("human_judge_count")[1].get<std::size_t>()};
  if (!met.at("evaluation_error_rate").is_null())
    m.metrics.evaluation_error_rate = met.at("evaluation_error_rate").get<double>();
  if (!met.at("avg_score").is_null()) m.metrics.avg_score = met.at("avg_score").get<double>();
  m.counts = j.value("counts", json::object());
  m.session_metrics = j.value("session_metrics", json::object());
  if (j.contains("prompt_revised_to") && !j.at("prompt_revised_to").is_null())
    m.prompt_revised_to = j.at("prompt_revised_to").get<std::string>();
  m.partial = j.value("partial", false);
  return m;
}

GenerationRecord accepted_record(const ScoredSample& s, const FsmGraph& graph) {
  GenerationRecord r = s.record;
  if (s.verdict && s.verdict->kind == VerdictKind::correct) {
    const auto* option = r.options.find(*s.verdict->new_label);
    if (!option) throw std::invalid_argument("correction names a label outside the option set");
    r.parsed_label = option->label;
    r.parsed_cot = render_cot(graph, option->transition_index, kTemplateV1);
    r.raw_output = render_output(r.parsed_cot, option->label);
    r.valid = true;
  }
  return r;
}

namespace {

std::string source_of(const ScoredSample& s) {
  if (!s.verdict) return "auto";
  return s.verdict->kind == VerdictKind::correct ? "human_correct" : "human_accept";
}

}  // namespace

IterationManifest improve(const IterationManifest& current, const GrowBatch& batch,
                          const ImproveInputs& in) {
  if (!in.graph || !in.prompts || !in.datasets) throw std::invalid_argument("improve: incomplete inputs");
  const auto pending = batch.pending();
  if (pending > 0 && !in.partial)
    throw LoopBlocked("round " + std::to_string(batch.round) + " has " + std::to_string(pending) +
                      " unresolved review items; supply verdicts or allow a partial step");

  Rng rng = Rng(current.master_seed).split(kPairStream + static_cast<std::uint64_t>(batch.round));
  std::size_t skipped = 0;
  for (const auto& s : batch.samples) {
    if (s.resolved() != Partition::accepted) continue;
    const auto record = accepted_record(s, *in.graph);
    in.datasets->grow_accepted.push_back(json{{"round", batch.round},
                                              {"sample_id", record.sample_id},
                                              {"source", source_of(s)},
                                              {"state", record.state.str()},
                                              {"prompt", record.prompt_text},
                                              {"target_cot", record.parsed_cot},
                                              {"target_label", std::string(1, *record.parsed_label)}});
    const auto pairs = make_eval_pairs(record, *in.graph, rng);
    if (!pairs) {
      ++skipped;
      continue;
    }
    for (const auto* p : {&pairs->positive, &pairs->negative}) {
      json row = *p;
      row["round"] = batch.round;
      in.datasets->eval_pairs.push_back(std::move(row));
    }
  }
  if (skipped > 0) spdlog::info("round {}: {} single-option samples have no negative", batch.round, skipped);

  write_jsonl(in.round_dir / current.dataset_refs.grow_accepted, in.datasets->grow_accepted);
  write_jsonl(in.round_dir / current.dataset_refs.eval_pairs, in.datasets->eval_pairs);

  std::vector<std::string> annotations;
  for (const auto& v : batch.applied_verdicts)
    if (!v.annotation.empty()) annotations.push_back(v.annotation);

  IterationManifest next = current;
  next.round = current.round + 1;
  next.policy_id = in.next_policy_id;
  next.metrics = {};
  next.counts = json::object();
  next.session_metrics = json::object();
  next.prompt_revised_to.reset();
  next.partial = false;
  if (auto revised = in.prompts->revise(annotations)) {
    next.judge_prompt_version = revised->id;
    spdlog::info("judge prompt revised to {}", revised->id);
  }
  return next;
}

std::vector<ReviewVerdict> scripted_verdicts(const GrowBatch& batch, const AnnotatorConfig& config) {
  std::vector<ReviewVerdict> out;
  for (const auto& s : batch.samples) {
    if (s.resolved() != Partition::human_queue) continue;
    ReviewVerdict v;
    v.sample_id = s.record.sample_id;
    v.annotator = config.id;
    v.round = batch.round;
    const auto& gold = s.record.gold_label;
    if (!gold || !s.record.options.contains(*gold)) {
      v.kind = VerdictKind::reject;
    } else if (s.record.valid && s.record.parsed_label == gold) {
      v.kind = VerdictKind::accept;
    } else {
      v.kind = VerdictKind::correct;
      v.new_label = gold;
    }
    out.push_back(std::move(v));
  }
  std::vector<std::string> texts;
  for (const auto& a : config.annotations)
    if (a.round == batch.round) texts.push_back(a.text);
  if (!texts.empty()) {
    if (out.empty())
      throw std::invalid_argument("scripted annotation for round " + std::to_string(batch.round) +
                                  " but its review queue is empty");
    // One annotation per verdict, in queue order.
    for (std::size_t i = 0; i < texts.size(); ++i) out[std::min(i, out.size() - 1)].annotation = texts[i];
  }
  return out;
}

namespace {

json grow_row(const ScoredSample& s) {
  return json{{"sample_id", s.record.sample_id},
              {"round", s.record.round},
              {"routed", to_string(s.routed)},
              {"record", s.record},
              {"report", s.report}};
}

json session_metrics_json(const GrowBatch& batch, const FsmGraph& graph) {
  std::vector<GenerationRecord> records;
  for (const auto& s : batch.samples) records.push_back(s.record);
  auto m = session_metrics(batch.transcripts, records, graph);
  auto j = to_json(m);
  // Timing is not reproducible; it lives in latency.json instead.
  j.erase("latency");
  j.erase("overhead");
  j.erase("cr");
  j.erase("human_judge_ratio");
  return j;
}

}  // namespace

LoopResult run_loop(const RunConfig& config, const LoopOptions& options) {
  if (options.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  const auto graph = std::make_shared<const FsmGraph>(load_fsm_file(config.resolve(config.fsm)));
  config.profile.validate(*graph);

  LoopResult result;
  result.run_dir = options.run_dir ? *options.run_dir : config.resolve(config.runs_dir) / config.run_id;
  if (fs::exists(result.run_dir) && !fs::is_empty(result.run_dir)) {
    if (!options.overwrite)
      throw std::runtime_error("run directory " + result.run_dir.string() + " already exists");
    fs::remove_all(result.run_dir);
  }
  fs::create_directories(result.run_dir);

  std::string initial_prompt = default_judge_prompt();
  if (config.judge_prompt) {
    std::ifstream in(config.resolve(*config.judge_prompt), std::ios::binary);
    if (!in) throw std::runtime_error("cannot read judge prompt " + config.judge_prompt->string());
    initial_prompt.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto prompts = PromptStore::open(result.run_dir / "prompts", initial_prompt);
  write_json_file(result.run_dir / "augmentation.json",
                  augmentation_comparison(*graph, kAugmentationSample, config.master_seed));

  std::vector<ReviewVerdict> dropped;
  const auto verdict_path = options.verdicts ? options.verdicts
                                             : (config.verdicts ? std::optional(config.resolve(*config.verdicts))
                                                                : std::nullopt);
  if (verdict_path) dropped = read_verdicts(*verdict_path);
  const bool partial = options.partial.value_or(config.partial);

  const auto policy = make_client(config.policy, graph);
  const auto evaluator = make_client(config.evaluator, graph);
  const auto judge = make_client(config.judge, graph);

  IterationManifest manifest;
  manifest.round = 0;
  manifest.policy_id = config.policy_id_for(0);
  manifest.thresholds = config.thresholds;
  manifest.alpha = config.alpha;
  manifest.score_jump = config.score_jump;
  manifest.judge_prompt_version = prompts.latest().id;
  manifest.master_seed = config.master_seed;
  manifest.sessions = config.sessions_per_round;

  Datasets datasets;
  ScoreCache previous;
  std::vector<bool> used(dropped.size(), false);

  for (int t = 0; t < options.rounds; ++t) {
    const auto round_dir = result.run_dir / ("round-" + std::to_string(t));
    fs::create_directories(round_dir);
    spdlog::info("round {}: growing {} sessions with policy {}", t, config.sessions_per_round, manifest.policy_id);

    EnsembleConfig ec{config.alpha, config.thresholds, config.score_jump, manifest.judge_prompt_version};
    const Ensemble ensemble(evaluator, judge, prompts, graph, ec);
    GrowInputs in{graph,         &policy,          &ensemble,
                  config.profile, config.master_seed, config.turn_budget,
                  config.template_version, t > 0 ? &previous : nullptr};
    auto batch = grow(in, t, config.sessions_per_round);

    std::vector<json> raw;
    std::vector<json> queue;
    for (const auto& s : batch.samples) {
      raw.push_back(grow_row(s));
      if (s.routed == Partition::human_queue) {
        ReviewItem item{s.record.sample_id, t, queue.size(), s.record, s.report, ItemStatus::pending, {}};
        queue.push_back(item);
      }
    }
    write_jsonl(round_dir / manifest.dataset_refs.grow_raw, raw);
    write_jsonl(round_dir / manifest.dataset_refs.human_queue, queue);
    if (batch.aborted) {
      write_json_file(round_dir / "ABORTED.json", json{{"round", t}, {"reason", batch.abort_reason}});
      throw std::runtime_error("round " + std::to_string(t) + " aborted: " + batch.abort_reason);
    }

    std::vector<ReviewVerdict> verdicts;
    std::set<std::string> ids;
    for (const auto& s : batch.samples) ids.insert(s.record.sample_id);
    for (std::size_t i = 0; i < dropped.size(); ++i) {
      const auto& v = dropped[i];
      if (v.round ? *v.round == t : ids.contains(v.sample_id)) {
        verdicts.push_back(v);
        used[i] = true;
      }
    }
    if (config.annotator && verdicts.empty()) verdicts = scripted_verdicts(batch, *config.annotator);
    ingest_verdicts(batch, verdicts);

    std::vector<json> verdict_rows;
    for (const auto& v : batch.applied_verdicts) verdict_rows.push_back(v);
    write_jsonl(round_dir / manifest.dataset_refs.verdicts, verdict_rows);

    manifest.metrics = iteration_metrics(batch);
    manifest.counts = json{{"samples", batch.samples.size()},
                           {"accepted", batch.count(Partition::accepted)},
                           {"rejected", batch.count(Partition::rejected)},
                           {"human_queue", batch.count(Partition::human_queue)},
                           {"pending", batch.pending()},
                           {"verdicts", batch.applied_verdicts.size()},
                           {"superseded", batch.audit.size()}};
    manifest.session_metrics = session_metrics_json(batch, *graph);
    manifest.partial = batch.pending() > 0;
    if (!batch.audit.empty()) write_jsonl(round_dir / "verdict_audit.jsonl", batch.audit);

    const auto [latency, overhead] = latency_summary(batch.transcripts);
    write_json_file(round_dir / "latency.json",
                    json{{"turn", {{"p50_ms", latency.p50}, {"p99_ms", latency.p99}, {"samples", latency.samples}}},
                         {"overhead", {{"p50_ms", overhead.p50}, {"p99_ms", overhead.p99}}}});

    ImproveInputs imp{graph.get(), &prompts, &datasets, round_dir, config.policy_id_for(t + 1), partial};
    auto next = improve(manifest, batch, imp);
    if (next.judge_prompt_version != manifest.judge_prompt_version)
      manifest.prompt_revised_to = next.judge_prompt_version;
    write_json_file(round_dir / "manifest.json", to_json(manifest));
    result.manifests.push_back(manifest);

    previous = score_cache(batch);
    manifest = std::move(next);
  }

  for (std::size_t i = 0; i < dropped.size(); ++i)
    if (!used[i]) throw std::invalid_argument("verdict for unknown sample '" + dropped[i].sample_id + "'");
  return result;
}

}  // namespace ivrkit
