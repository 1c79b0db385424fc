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

#include "ivrkit/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "ivrkit/jsonl.hpp"

namespace ivrkit {

using json = nlohmann::json;
namespace fs = std::filesystem;

json augmentation_comparison(const FsmGraph& graph, std::size_t n, std::uint64_t seed,
                             std::size_t max_length) {
  const Rng master(seed);
  std::vector<SyntheticDialogue> logs;
  logs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = master.split(0x6c6f6700000000ULL + i);
    logs.push_back(replay_weighted_dialogue(graph, rng, max_length));
  }
  CorpusOptions options;
  options.n = n;
  options.seed = seed;
  options.max_length = max_length;
  options.dedup = false;
  const auto corpus = generate_corpus(graph, options);
  return json{{"dialogues", n},
              {"pre", to_json(distribution_report(logs, &graph))},
              {"post", to_json(distribution_report(corpus.dialogues, &graph))}};
}

namespace {

std::string cell(const json& v, const char* fmt_spec = "{:.4f}") {
  if (v.is_null()) return "-";
  if (v.is_number_float()) return fmt::format(fmt::runtime(fmt_spec), v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

json ratio_value(const json& r) { return r.is_object() ? r.at("value") : json(nullptr); }

}  // namespace

ReportBundle build_report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw std::runtime_error("run directory not found: " + run_dir.string());

  std::vector<std::pair<int, fs::path>> rounds;
  const std::regex round_re("round-([0-9]+)");
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, round_re)) rounds.emplace_back(std::stoi(m[1]), entry.path());
  }
  std::sort(rounds.begin(), rounds.end());

  ReportBundle r;
  r.series = json{{"rounds", json::array()}};
  std::ostringstream table;
  table << "| round | policy | judge prompt | samples | queued | human_judge_ratio | eval_error | avg_score | tsr | "
           "hallucination | raw_invalid | p50 ms | p99 ms |\n"
        << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";

  for (const auto& [t, dir] : rounds) {
    if (!fs::exists(dir / "manifest.json"))
      throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
    const auto m = read_json_file(dir / "manifest.json");
    json latency = nullptr;
    if (fs::exists(dir / "latency.json")) latency = read_json_file(dir / "latency.json");

    const auto& metrics = m.at("metrics");
    const auto& sm = m.value("session_metrics", json::object());
    json row{{"round", m.at("round")},
             {"policy_id", m.at("policy_id")},
             {"judge_prompt_version", m.at("judge_prompt_version")},
             {"samples", m.at("counts").value("samples", 0)},
             {"human_queue", m.at("counts").value("human_queue", 0)},
             {"human_judge_ratio", metrics.at("human_judge_ratio")},
             {"evaluation_error_rate", metrics.at("evaluation_error_rate")},
             {"avg_score", metrics.at("avg_score")},
             {"tsr", ratio_value(sm.value("tsr", json()))},
             {"hallucination_rate", ratio_value(sm.value("hallucination_rate", json()))},
             {"raw_invalid_rate", ratio_value(sm.value("raw_invalid_rate", json()))},
             {"latency", latency}};
    r.series["rounds"].push_back(row);

    const json p50 = latency.is_null() ? json(nullptr) : latency.at("turn").at("p50_ms");
    const json p99 = latency.is_null() ? json(nullptr) : latency.at("turn").at("p99_ms");
    table << fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", t,
                         cell(row["policy_id"]), cell(row["judge_prompt_version"]), cell(row["samples"]),
                         cell(row["human_queue"]), cell(row["human_judge_ratio"]),
                         cell(row["evaluation_error_rate"]), cell(row["avg_score"]), cell(row["tsr"]),
                         cell(row["hallucination_rate"]), cell(row["raw_invalid_rate"]),
                         cell(p50, "{:.3f}"), cell(p99, "{:.3f}"));
  }

  if (fs::exists(run_dir / "augmentation.json")) {
    const auto aug = read_json_file(run_dir / "augmentation.json");
    r.series["augmentation"] = aug;
    table << "\n| turns per dialogue | pre (log replay) | post (augmented) |\n|---|---|---|\n";
    std::map<std::string, std::pair<json, json>> bins;
    for (const auto& [k, v] : aug.at("pre").at("turn_counts").items()) bins[k].first = v;
    for (const auto& [k, v] : aug.at("post").at("turn_counts").items()) bins[k].second = v;
    std::vector<std::pair<int, std::string>> keys;
    for (const auto& [k, _] : bins) keys.emplace_back(std::stoi(k), k);
    std::sort(keys.begin(), keys.end());
    for (const auto& [_, k] : keys)
      table << fmt::format("| {} | {} | {} |\n", k, cell(bins[k].first.is_null() ? json(0) : bins[k].first),
                           cell(bins[k].second.is_null() ? json(0) : bins[k].second));
    table << fmt::format("\nmax deviation from uniform: pre {:.4f}, post {:.4f}\n",
                         aug.at("pre").at("max_deviation").get<double>(),
                         aug.at("post").at("max_deviation").get<double>());
  }
  r.table = table.str();
  return r;
}

void write_report(const fs::path& run_dir, const ReportBundle& report) {
  write_json_file(run_dir / "report.json", report.series);
  std::ofstream out(run_dir / "report.md", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report.md");
  out << report.table;
}

}  // namespace ivrkit
