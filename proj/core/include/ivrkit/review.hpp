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

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivrkit/evaluator.hpp"
#include "ivrkit/records.hpp"

namespace ivrkit {

enum class ItemStatus { pending, resolved };
enum class VerdictKind { accept, reject, correct };

std::string_view to_string(ItemStatus s);
ItemStatus item_status_from_string(std::string_view s);
std::string_view to_string(VerdictKind k);
VerdictKind verdict_kind_from_string(std::string_view s);

struct ReviewVerdict {
  std::string sample_id;
  VerdictKind kind = VerdictKind::accept;
  std::optional<char> new_label;  // correct only
  std::string annotator;
  std::string annotation;  // criterion text for the judge prompt, may be empty
  std::string timestamp;
  std::optional<int> round;
};

struct ReviewItem {
  std::string sample_id;
  int round = 0;
  std::size_t seq = 0;  // enqueue order
  GenerationRecord record;
  ConfidenceReport report;
  ItemStatus status = ItemStatus::pending;
  std::optional<ReviewVerdict> verdict;

  RoutingReason reason() const { return report.routing.reason; }
};

void to_json(nlohmann::json& j, const ReviewVerdict& v);
void from_json(const nlohmann::json& j, ReviewVerdict& v);
void to_json(nlohmann::json& j, const ReviewItem& item);
void from_json(const nlohmann::json& j, ReviewItem& item);

/// Throws std::invalid_argument when the verdict is malformed for `item`:
/// a correction must name one of the item's option labels, other verdicts
/// must not carry a label.
void validate_verdict(const ReviewVerdict& verdict, const ReviewItem& item);

enum class CommitStatus { committed, conflict, not_found, invalid };

struct CommitOutcome {
  CommitStatus status = CommitStatus::invalid;
  std::string message;
};

/// Human-review queue with first-committed-wins verdicts. Thread-safe.
///
/// Committed verdicts are appended, one JSON line each, to the optional log
/// before the item flips to resolved.
class ReviewStore {
 public:
  explicit ReviewStore(std::optional<std::filesystem::path> verdict_log = std::nullopt);

  /// Duplicate sample ids throw std::invalid_argument.
  void enqueue(ReviewItem item);

  struct Query {
    std::optional<ItemStatus> status;
    std::optional<RoutingReason> reason;
    std::optional<int> round;
    std::size_t page = 1;  // 1-based
    std::size_t page_size = 20;
  };

  struct Page {
    std::vector<ReviewItem> items;
    std::size_t total = 0;  // matches before paging
    std::size_t page = 1;
    std::size_t page_size = 20;
    std::size_t pages = 0;
    std::map<std::string, std::size_t> counts_by_reason;  // pending items
  };

  /// Items in enqueue order.
  Page list(const Query& query) const;
  std::optional<ReviewItem> get(std::string_view sample_id) const;
  CommitOutcome commit(ReviewVerdict verdict);
  std::vector<ReviewVerdict> verdicts() const;
  std::size_t size() const;
  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::filesystem::path> log_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<ReviewVerdict> committed_;
};

std::vector<ReviewVerdict> read_verdicts(const std::filesystem::path& path);

}  // namespace ivrkit
