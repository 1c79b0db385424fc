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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ivrkit/augmentor.hpp"
#include "ivrkit/evaluator.hpp"
#include "ivrkit/fsm.hpp"
#include "ivrkit/jsonl.hpp"
#include "ivrkit/loop.hpp"
#include "ivrkit/prompt_store.hpp"
#include "ivrkit/report.hpp"
#include "ivrkit/run_config.hpp"
#include "ivrkit/service.hpp"
#include "ivrkit/simulator.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

int fsm_validate(const std::string& file) {
  std::vector<ivrkit::Diagnostic> diags;
  try {
    diags = ivrkit::validate_fsm_document(ivrkit::read_json_file(file));
  } catch (const std::exception& e) {
    diags.push_back({"parse", "", e.what()});
  }
  json out{{"file", file}, {"valid", diags.empty()}, {"diagnostics", json::array()}};
  for (const auto& d : diags)
    out["diagnostics"].push_back({{"code", d.code}, {"location", d.location}, {"message", d.message}});
  std::cout << out.dump(2) << '\n';
  return diags.empty() ? 0 : 1;
}

struct AugmentArgs {
  std::string fsm;
  std::size_t n = ivrkit::kDefaultCorpusSize;
  std::uint64_t seed = 0;
  std::size_t max_length = 10;
  bool no_dedup = false;
  std::string out;
  std::string template_version = "v1";
};

int augment(const AugmentArgs& a) {
  const auto graph = ivrkit::load_fsm_file(a.fsm);
  ivrkit::CorpusOptions options;
  options.n = a.n;
  options.seed = a.seed;
  options.max_length = a.max_length;
  options.dedup = !a.no_dedup;
  const auto corpus = ivrkit::generate_corpus(graph, options);

  std::vector<ivrkit::TrainingExample> examples;
  for (const auto& d : corpus.dialogues) {
    auto turn_examples = ivrkit::to_training_examples(d, graph, a.template_version);
    examples.insert(examples.end(), turn_examples.begin(), turn_examples.end());
  }
  ivrkit::write_training_examples(a.out, examples);
  const auto report = ivrkit::distribution_report(corpus.dialogues, &graph);
  std::cout << json{{"dialogues", corpus.dialogues.size()},
                    {"examples", examples.size()},
                    {"attempts", corpus.attempts},
                    {"exhausted", corpus.exhausted},
                    {"max_deviation", report.max_deviation}}
                   .dump(2)
            << '\n';
  if (corpus.exhausted)
    spdlog::warn("only {} unique dialogues exist within the attempt cap; asked for {}",
                 corpus.dialogues.size(), a.n);
  return 0;
}

int augment_report(const std::string& in, const std::string& fsm) {
  const auto examples = ivrkit::read_training_examples(in);
  const auto dialogues = ivrkit::dialogues_from_examples(examples);
  std::optional<ivrkit::FsmGraph> graph;
  if (!fsm.empty()) graph = ivrkit::load_fsm_file(fsm);
  const auto report = ivrkit::distribution_report(dialogues, graph ? &*graph : nullptr);
  std::cout << ivrkit::to_json(report).dump(2) << '\n';
  return 0;
}

struct TestsetArgs {
  std::string fsm;
  std::string kind = "general";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string profile;
  std::optional<std::size_t> min_length;
  double noised_fraction = 0.0;
  std::string out;
};

int simulate_testset(const TestsetArgs& a) {
  const auto graph = ivrkit::load_fsm_file(a.fsm);
  ivrkit::TestsetOptions options;
  if (!a.profile.empty()) options.profile = ivrkit::load_profile_file(a.profile);
  options.min_length = a.min_length;
  options.noised_fraction = a.noised_fraction;
  ivrkit::Rng rng(a.seed);
  const auto items = ivrkit::build_testset(graph, ivrkit::testset_kind_from_string(a.kind), a.n, rng, options);
  std::vector<json> rows(items.begin(), items.end());
  if (a.out.empty()) {
    for (const auto& r : rows) std::cout << r.dump() << '\n';
  } else {
    ivrkit::write_jsonl(a.out, rows);
  }
  return 0;
}

int evaluate(const std::string& config_path, const std::string& in, const std::string& out) {
  const auto config = ivrkit::load_run_config(config_path);
  const auto graph = std::make_shared<const ivrkit::FsmGraph>(ivrkit::load_fsm_file(config.resolve(config.fsm)));
  const auto evaluator = ivrkit::make_client(config.evaluator, graph);
  const auto judge = ivrkit::make_client(config.judge, graph);
  const auto prompts = ivrkit::PromptStore::in_memory(ivrkit::default_judge_prompt());
  const ivrkit::Ensemble ensemble(evaluator, judge, prompts, graph,
                                  {config.alpha, config.thresholds, config.score_jump, "v0"});
  std::vector<json> rows;
  std::size_t index = 0;
  for (const auto& row : ivrkit::read_jsonl(in)) {
    const auto record = row.contains("record") ? row.at("record").get<ivrkit::GenerationRecord>()
                                               : row.get<ivrkit::GenerationRecord>();
    if (!record.valid) {
      ivrkit::ConfidenceReport r;
      r.sample_id = record.sample_id;
      r.routing = {ivrkit::RoutingKind::auto_reject, ivrkit::RoutingReason::invalid_output};
      rows.push_back(r);
    } else {
      rows.push_back(ensemble.evaluate(record, index));
    }
    ++index;
  }
  if (out.empty()) {
    for (const auto& r : rows) std::cout << r.dump() << '\n';
  } else {
    ivrkit::write_jsonl(out, rows);
  }
  return 0;
}

struct LoopArgs {
  std::string config;
  int rounds = 1;
  std::string verdicts;
  bool partial = false;
  std::string run_dir;
  bool overwrite = false;
};

int run_loop(const LoopArgs& a) {
  const auto config = ivrkit::load_run_config(a.config);
  ivrkit::LoopOptions options;
  options.rounds = a.rounds;
  if (!a.verdicts.empty()) options.verdicts = a.verdicts;
  if (a.partial) options.partial = true;
  if (!a.run_dir.empty()) options.run_dir = a.run_dir;
  options.overwrite = a.overwrite;
  const auto result = ivrkit::run_loop(config, options);
  const auto report = ivrkit::build_report(result.run_dir);
  ivrkit::write_report(result.run_dir, report);
  std::cout << report.table;
  return 0;
}

int serve(const std::string& config_path, std::optional<int> port) {
  const fs::path path(config_path);
  auto config = ivrkit::service_config_from_json(ivrkit::read_json_file(path),
                                                 path.has_parent_path() ? path.parent_path() : fs::path("."));
  if (port) config.port = *port;
  ivrkit::Service service(std::move(config));
  service.bind();
  service.run();
  return 0;
}

int report(const std::string& run_dir) {
  const auto r = ivrkit::build_report(run_dir);
  ivrkit::write_report(run_dir, r);
  std::cout << r.table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ivrkit: FSM-guided IVR dialogue tooling"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  auto* fsm = app.add_subcommand("fsm", "FSM utilities");
  fsm->require_subcommand(1);
  std::string fsm_file;
  auto* validate = fsm->add_subcommand("validate", "check an FSM document");
  validate->add_option("file", fsm_file, "FSM JSON file")->required();

  AugmentArgs aug;
  auto* augment_cmd = app.add_subcommand("augment", "synthesize a balanced training corpus");
  augment_cmd->add_option("--fsm", aug.fsm, "FSM JSON file");
  augment_cmd->add_option("--n", aug.n, "dialogues to synthesize");
  augment_cmd->add_option("--seed", aug.seed, "master seed");
  augment_cmd->add_option("--max-length", aug.max_length, "longest path, in states");
  augment_cmd->add_flag("--no-dedup", aug.no_dedup, "keep duplicate dialogues");
  augment_cmd->add_option("--template", aug.template_version, "prompt template version");
  augment_cmd->add_option("--out", aug.out, "output JSONL");
  std::string report_in, report_fsm;
  auto* augment_report_cmd = augment_cmd->add_subcommand("report", "distribution report of a corpus");
  augment_report_cmd->add_option("--in", report_in, "training-example JSONL")->required();
  augment_report_cmd->add_option("--fsm", report_fsm, "FSM, to count unseen variants");

  TestsetArgs ts;
  std::optional<std::size_t> min_length;
  auto* simulate = app.add_subcommand("simulate", "owner simulator");
  simulate->require_subcommand(1);
  auto* testset = simulate->add_subcommand("testset", "build a labelled single-turn test set");
  testset->add_option("--fsm", ts.fsm, "FSM JSON file")->required();
  testset->add_option("--kind", ts.kind, "effect|general|robust")->check(CLI::IsMember({"effect", "general", "robust"}));
  testset->add_option("--n", ts.n, "items");
  testset->add_option("--seed", ts.seed, "seed");
  testset->add_option("--profile", ts.profile, "owner profile JSON");
  testset->add_option("--min-length", min_length, "robust: minimum reply length in codepoints");
  testset->add_option("--noised-fraction", ts.noised_fraction, "robust: share of noise-perturbed items");
  testset->add_option("--out", ts.out, "output JSONL, stdout when omitted");

  std::string eval_config, eval_in, eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "score GenerationRecord JSONL with the evaluator ensemble");
  eval_cmd->add_option("--config", eval_config, "run config")->required();
  eval_cmd->add_option("--in", eval_in, "records JSONL")->required();
  eval_cmd->add_option("--out", eval_out, "ConfidenceReport JSONL, stdout when omitted");

  LoopArgs loop;
  auto* loop_cmd = app.add_subcommand("run-loop", "run grow/improve rounds");
  loop_cmd->add_option("--config", loop.config, "run config")->required();
  loop_cmd->add_option("--rounds", loop.rounds, "rounds")->check(CLI::PositiveNumber);
  loop_cmd->add_option("--verdicts", loop.verdicts, "verdict JSONL (file drop)");
  loop_cmd->add_flag("--partial", loop.partial, "continue with unresolved review items");
  loop_cmd->add_option("--run-dir", loop.run_dir, "output directory, default runs_dir/run_id");
  loop_cmd->add_flag("--overwrite", loop.overwrite, "replace an existing run directory");

  std::string serve_config;
  std::optional<int> serve_port;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for sessions and the review queue");
  serve_cmd->add_option("--config", serve_config, "service config")->required();
  serve_cmd->add_option("--port", serve_port, "override the configured port");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "summarize a run directory");
  report_cmd->add_option("--run-dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_default_logger(spdlog::stderr_color_mt("ivrkit"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (validate->parsed()) return fsm_validate(fsm_file);
    if (augment_report_cmd->parsed()) return augment_report(report_in, report_fsm);
    if (augment_cmd->parsed()) {
      if (aug.fsm.empty() || aug.out.empty()) {
        std::cerr << "augment: --fsm and --out are required\n";
        return 2;
      }
      return augment(aug);
    }
    if (testset->parsed()) {
      ts.min_length = min_length;
      return simulate_testset(ts);
    }
    if (eval_cmd->parsed()) return evaluate(eval_config, eval_in, eval_out);
    if (loop_cmd->parsed()) return run_loop(loop);
    if (serve_cmd->parsed()) return serve(serve_config, serve_port);
    if (report_cmd->parsed()) return report(report_dir);
  } catch (const ivrkit::FsmError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
