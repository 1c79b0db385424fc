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

#include "ivrkit/review.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ivrkit {

using json = nlohmann::json;

std::string_view to_string(ItemStatus s) { return s == ItemStatus::pending ? "pending" : "resolved"; }

ItemStatus item_status_from_string(std::string_view s) {
  if (s == "pending") return ItemStatus::pending;
  if (s == "resolved") return ItemStatus::resolved;
  throw std::invalid_argument("unknown item status '" + std::string(s) + "'");
}

std::string_view to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::accept: return "accept";
    case VerdictKind::reject: return "reject";
    case VerdictKind::correct: return "correct";
  }
  return "unknown";
}

VerdictKind verdict_kind_from_string(std::string_view s) {
  if (s == "accept") return VerdictKind::accept;
  if (s == "reject") return VerdictKind::reject;
  if (s == "correct") return VerdictKind::correct;
  throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

void to_json(json& j, const ReviewVerdict& v) {
  j = json{{"sample_id", v.sample_id}, {"verdict", to_string(v.kind)}};
  if (v.new_label) j["new_label"] = std::string(1, *v.new_label);
  j["annotator"] = v.annotator;
  if (!v.annotation.empty()) j["annotation"] = v.annotation;
  if (!v.timestamp.empty()) j["timestamp"] = v.timestamp;
  if (v.round) j["round"] = *v.round;
}

void from_json(const json& j, ReviewVerdict& v) {
  v = {};
  v.sample_id = j.at("sample_id").get<std::string>();
  v.kind = verdict_kind_from_string(j.at("verdict").get<std::string>());
  if (j.contains("new_label") && !j.at("new_label").is_null()) {
    const auto label = j.at("new_label").get<std::string>();
    if (label.size() != 1) throw std::invalid_argument("new_label must be a single letter");
    v.new_label = label[0];
  }
  v.annotator = j.value("annotator", std::string());
  v.annotation = j.value("annotation", std::string());
  v.timestamp = j.value("timestamp", std::string());
  if (j.contains("round")) v.round = j.at("round").get<int>();
}

void to_json(json& j, const ReviewItem& item) {
  j = json{{"sample_id", item.sample_id},
           {"round", item.round},
           {"seq", item.seq},
           {"status", to_string(item.status)},
           {"reason", to_string(item.reason())},
           {"record", item.record},
           {"report", item.report}};
  if (item.verdict) j["verdict"] = *item.verdict;
}

void from_json(const json& j, ReviewItem& item) {
  item = {};
  item.sample_id = j.at("sample_id").get<std::string>();
  item.round = j.value("round", 0);
  item.seq = j.value("seq", std::size_t{0});
  item.status = item_status_from_string(j.value("status", std::string("pending")));
  item.record = j.at("record").get<GenerationRecord>();
  item.report = j.at("report").get<ConfidenceReport>();
  if (j.contains("verdict")) item.verdict = j.at("verdict").get<ReviewVerdict>();
}

void validate_verdict(const ReviewVerdict& verdict, const ReviewItem& item) {
  if (verdict.kind == VerdictKind::correct) {
    if (!verdict.new_label) throw std::invalid_argument("correct verdict needs new_label");
    if (!item.record.options.contains(*verdict.new_label))
      throw std::invalid_argument(std::string("label ") + *verdict.new_label +
                                  " is not an option of item " + item.sample_id);
  } else if (verdict.new_label) {
    throw std::invalid_argument("new_label is only allowed on correct verdicts");
  }
}

ReviewStore::ReviewStore(std::optional<std::filesystem::path> verdict_log)
    : log_(std::move(verdict_log)) {}

void ReviewStore::enqueue(ReviewItem item) {
  std::lock_guard lock(mu_);
  if (index_.contains(item.sample_id))
    throw std::invalid_argument("duplicate review item '" + item.sample_id + "'");
  item.seq = items_.size();
  index_.emplace(item.sample_id, items_.size());
  items_.push_back(std::move(item));
}

ReviewStore::Page ReviewStore::list(const Query& query) const {
  if (query.page == 0 || query.page_size == 0)
    throw std::invalid_argument("page and page_size must be >= 1");
  std::lock_guard lock(mu_);
  Page page;
  page.page = query.page;
  page.page_size = query.page_size;
  const std::size_t first = (query.page - 1) * query.page_size;
  for (const auto& item : items_) {
    if (item.status == ItemStatus::pending) ++page.counts_by_reason[std::string(to_string(item.reason()))];
    if (query.status && item.status != *query.status) continue;
    if (query.reason && item.reason() != *query.reason) continue;
    if (query.round && item.round != *query.round) continue;
    if (page.total >= first && page.items.size() < query.page_size) page.items.push_back(item);
    ++page.total;
  }
  page.pages = (page.total + query.page_size - 1) / query.page_size;
  return page;
}

std::optional<ReviewItem> ReviewStore::get(std::string_view sample_id) const {
  std::lock_guard lock(mu_);
  const auto it = index_.find(sample_id);
  if (it == index_.end()) return std::nullopt;
  return items_[it->second];
}

CommitOutcome ReviewStore::commit(ReviewVerdict verdict) {
  std::lock_guard lock(mu_);
  const auto it = index_.find(verdict.sample_id);
  if (it == index_.end()) return {CommitStatus::not_found, "unknown item '" + verdict.sample_id + "'"};
  auto& item = items_[it->second];
  try {
    validate_verdict(verdict, item);
  } catch (const std::invalid_argument& e) {
    return {CommitStatus::invalid, e.what()};
  }
  if (item.status != ItemStatus::pending)
    return {CommitStatus::conflict, "item '" + verdict.sample_id + "' is already resolved"};
  if (!verdict.round) verdict.round = item.round;
  if (log_) {
    std::ofstream out(*log_, std::ios::binary | std::ios::app);
    const auto line = json(verdict).dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) return {CommitStatus::invalid, "cannot persist verdict to " + log_->string()};
  }
  item.status = ItemStatus::resolved;
  item.verdict = verdict;
  committed_.push_back(std::move(verdict));
  return {CommitStatus::committed, {}};
}

std::vector<ReviewVerdict> ReviewStore::verdicts() const {
  std::lock_guard lock(mu_);
  return committed_;
}

std::size_t ReviewStore::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::size_t ReviewStore::pending() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const ReviewItem& i) {
    return i.status == ItemStatus::pending;
  }));
}

std::vector<ReviewVerdict> read_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read verdicts " + path.string());
  std::vector<ReviewVerdict> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<ReviewVerdict>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ivrkit
