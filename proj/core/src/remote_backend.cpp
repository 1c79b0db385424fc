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

#include "ivrkit/remote_backend.hpp"

#include <cstdlib>

#include <httplib.h>

namespace ivrkit {

using json = nlohmann::json;

RemoteBackend::RemoteBackend(BackendProfile profile) : profile_(std::move(profile)) {}

json RemoteBackend::post(const std::string& path, const json& body) const {
  httplib::Client client(profile_.endpoint);
  const auto ms = profile_.deadline.count();
  const auto sec = static_cast<time_t>(ms / 1000);
  const auto usec = static_cast<time_t>((ms % 1000) * 1000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  httplib::Headers headers;
  if (const char* token = std::getenv(profile_.credential_env.c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                          ? GatewayError::Kind::timeout
                          : GatewayError::Kind::transport;
    throw GatewayError(kind, "POST " + path + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw GatewayError(GatewayError::Kind::transport,
                       "POST " + path + " returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw GatewayError(GatewayError::Kind::malformed, "POST " + path + ": " + e.what());
  }
}

std::string RemoteBackend::complete(const Request& request) {
  const auto reply =
      post("/v1/complete", {{"prompt", request.prompt}, {"deadline_ms", profile_.deadline.count()}});
  const auto it = reply.find("text");
  if (it == reply.end() || !it->is_string())
    throw GatewayError(GatewayError::Kind::malformed, "complete response lacks 'text'");
  return it->get<std::string>();
}

std::vector<TokenScore> RemoteBackend::score(const Request& request, std::string_view target) {
  const auto reply = post("/v1/score", {{"prompt", request.prompt}, {"target", std::string(target)}});
  const auto it = reply.find("tokens");
  if (it == reply.end() || !it->is_array())
    throw GatewayError(GatewayError::Kind::malformed, "score response lacks 'tokens'");
  std::vector<TokenScore> out;
  for (const auto& t : *it) {
    if (!t.contains("token") || !t.contains("prob") || !t["prob"].is_number())
      throw GatewayError(GatewayError::Kind::malformed, "token entry needs 'token' and 'prob'");
    out.push_back({t["token"].get<std::string>(), t["prob"].get<double>()});
  }
  return out;
}

JudgeScores RemoteBackend::judge(const Request& request) {
  const auto reply = post("/v1/judge", {{"prompt", request.prompt}});
  JudgeScores out;
  if (const auto it = reply.find("logits"); it != reply.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      throw GatewayError(GatewayError::Kind::malformed, "'logits' must be [g0, g1]");
    out.logits = std::pair{(*it)[0].get<double>(), (*it)[1].get<double>()};
  } else if (const auto p = reply.find("probability"); p != reply.end() && p->is_number()) {
    out.probability = p->get<double>();
  } else {
    throw GatewayError(GatewayError::Kind::malformed, "judge response lacks 'logits' or 'probability'");
  }
  return out;
}

}  // namespace ivrkit
