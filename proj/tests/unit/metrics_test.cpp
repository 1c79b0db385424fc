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

#include "ivrkit/metrics.hpp"

#include <algorithm>
#include <memory>
#include <span>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ivrkit/jsonl.hpp"
#include "test_support.hpp"

namespace ivrkit {
namespace {

using nlohmann::json;

// std::vector<bool> is not contiguous, so flags live in a plain array.
struct Flags {
  explicit Flags(std::size_t n, bool value = false) : data(new bool[n]), size(n) {
    std::fill_n(data.get(), n, value);
  }
  bool& operator[](std::size_t i) { return data[i]; }
  operator std::span<const bool>() const { return {data.get(), size}; }
  std::unique_ptr<bool[]> data;
  std::size_t size;
};

struct Corpus {
  std::vector<DialogueTranscript> transcripts;
  std::vector<std::string> tags;  // per turn, in order
  std::vector<bool> judgments;
  Flags judgment_flags() const {
    Flags f(judgments.size());
    for (std::size_t i = 0; i < judgments.size(); ++i) f[i] = judgments[i];
    return f;
  }
  json expected;
};

Corpus load_corpus() {
  Corpus c;
  for (const auto& row : read_jsonl(testing::fixture_path("metrics_corpus/transcripts.jsonl"))) {
    DialogueTranscript t;
    t.session_id = row.at("session_id");
    for (const auto& turn : row.at("turns")) {
      t.turns.push_back(turn.get<TranscriptTurn>());
      c.tags.push_back(turn.at("tag"));
    }
    c.transcripts.push_back(std::move(t));
  }
  for (const auto& row : read_jsonl(testing::fixture_path("metrics_corpus/judgments.jsonl")))
    c.judgments.push_back(row.at("correct").get<bool>());
  c.expected = read_json_file(testing::fixture_path("metrics_corpus/expected.json"));
  return c;
}

TEST(Metrics, CrFromCounts) {
  Flags half(100);
  for (int i = 0; i < 50; ++i) half[i * 2] = true;
  EXPECT_EQ(*compute_cr(half), (Ratio{50, 100}));
  EXPECT_EQ(compute_cr(half)->value(), 0.5);
  const Flags all(7, true);
  EXPECT_EQ(compute_cr(all)->value(), 1.0);
  EXPECT_FALSE(compute_cr(Flags(0)));
}

TEST(Metrics, TsrFromFlags) {
  Flags flags(50, true);
  for (int i = 0; i < 8; ++i) flags[i * 6] = false;
  EXPECT_EQ(*compute_tsr(flags), (Ratio{42, 50}));
  EXPECT_DOUBLE_EQ(compute_tsr(flags)->value(), 0.84);
  EXPECT_FALSE(compute_tsr(std::span<const bool>(Flags(0))));
}

TEST(Metrics, HandLabelledCorpusMatchesManualCounts) {
  const auto c = load_corpus();
  ASSERT_EQ(c.transcripts.size(), 50u);
  std::size_t ok_tags = 0;
  for (const auto& tag : c.tags) ok_tags += tag == "o";

  const auto tsr = compute_tsr(c.transcripts);
  ASSERT_TRUE(tsr);
  EXPECT_EQ(tsr->numerator, c.expected.at("N_S").get<std::size_t>());
  EXPECT_EQ(tsr->denominator, c.expected.at("N_T").get<std::size_t>());
  EXPECT_EQ(tsr->numerator, ok_tags);
  EXPECT_EQ(tsr->denominator, c.tags.size());

  const auto cr = compute_cr(c.judgment_flags());
  EXPECT_EQ(cr->numerator, c.expected.at("N_C").get<std::size_t>());
  EXPECT_EQ(cr->denominator, c.expected.at("N").get<std::size_t>());
}

TEST(Metrics, TsrByAttributeSumsToTotal) {
  const auto c = load_corpus();
  const auto g = testing::load_graph("poi_verify");
  const auto by = tsr_by_attribute(c.transcripts, *g);
  Ratio sum;
  for (const auto& [goal, r] : by) {
    sum.numerator += r.numerator;
    sum.denominator += r.denominator;
  }
  EXPECT_EQ(sum, *compute_tsr(c.transcripts));
  EXPECT_TRUE(by.contains("name"));
}

TEST(Metrics, ValidatedCorpusHasNoHallucination) {
  const auto c = load_corpus();
  const auto g = testing::load_graph("poi_verify");
  const auto h = hallucination_rate(c.transcripts, *g);
  ASSERT_TRUE(h);
  EXPECT_EQ(h->numerator, 0u);
  EXPECT_EQ(h->denominator, c.tags.size());
}

TEST(Metrics, UnvalidatedReplayCountsOutOfSetQueries) {
  const auto g = testing::load_graph("hours");
  DialogueTranscript t;
  for (int i = 0; i < 10; ++i) {
    TranscriptTurn turn;
    turn.state = StateId("s1");
    turn.emitted_query = i < 3 ? "Would you like to buy insurance?" : "What time do you close?";
    t.turns.push_back(turn);
  }
  const std::vector<DialogueTranscript> ts{t};
  EXPECT_EQ(*hallucination_rate(ts, *g), (Ratio{3, 10}));
  EXPECT_FALSE(hallucination_rate(std::vector<DialogueTranscript>{}, *g));
}

TEST(Metrics, RawInvalidRate) {
  std::vector<GenerationRecord> records(20);
  for (int i = 0; i < 20; ++i) records[i].valid = i % 4 != 0;
  EXPECT_EQ(*raw_invalid_rate(records), (Ratio{5, 20}));
  EXPECT_FALSE(raw_invalid_rate(std::vector<GenerationRecord>{}));
}

TEST(Metrics, NearestRankPercentile) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  EXPECT_EQ(percentile(v, 50), 50);
  EXPECT_EQ(percentile(v, 99), 99);
  EXPECT_EQ(percentile(v, 100), 100);
  EXPECT_EQ(percentile({7.0}, 99), 7.0);
  EXPECT_THROW(percentile(v, 0), std::invalid_argument);
  EXPECT_THROW(percentile({}, 50), std::invalid_argument);
}

TEST(Metrics, OverheadExcludesBackendTime) {
  DialogueTranscript t;
  for (int i = 1; i <= 100; ++i) {
    TranscriptTurn turn;
    turn.latency_ms = 50.0 + i * 0.01;
    turn.backend_ms = 50.0;
    t.turns.push_back(turn);
  }
  const std::vector<DialogueTranscript> ts{t};
  const auto [total, overhead] = latency_summary(ts);
  EXPECT_EQ(total.samples, 100u);
  EXPECT_NEAR(overhead.p99, 0.99, 1e-9);
  EXPECT_NEAR(total.p50, 50.5, 1e-9);
}

TEST(Metrics, SnapshotJsonHasRatios) {
  const auto c = load_corpus();
  const auto g = testing::load_graph("poi_verify");
  const auto snap = session_metrics(c.transcripts, {}, *g);
  const auto j = to_json(snap);
  EXPECT_EQ(j.at("tsr").at("numerator"), c.expected.at("N_S"));
  EXPECT_TRUE(j.at("raw_invalid_rate").is_null());
}

}  // namespace
}  // namespace ivrkit
