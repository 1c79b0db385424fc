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

#include "ivrkit/gateway.hpp"

namespace ivrkit {

/// JSON-over-HTTP backend (see docs/wire.md). Each call opens its own
/// connection with socket timeouts equal to the profile deadline.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendProfile profile);

  std::string complete(const Request& request) override;
  std::vector<TokenScore> score(const Request& request, std::string_view target) override;
  JudgeScores judge(const Request& request) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  BackendProfile profile_;
};

}  // namespace ivrkit
