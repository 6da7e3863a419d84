/*
 * Copyright 2026 The Trapkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "trapkit/remote_provider.h"

#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "trapkit/error.h"

namespace trapkit {

using nlohmann::json;

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& slots) : slots_(slots) {
    slots_.acquire();
  }
  ~SlotGuard() { slots_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& slots_;
};

}  // namespace

struct RemoteProvider::Impl {
  ProviderConfig config;
  std::chrono::milliseconds initial_backoff;
  std::counting_semaphore<> slots;

  Impl(const ProviderConfig& c, std::chrono::milliseconds backoff)
      : config(c), initial_backoff(backoff), slots(c.max_parallel) {}

  json Post(const std::string& path, json body,
            std::atomic<uint64_t>& attempts) {
    if (!config.passthrough.empty()) body["options"] = config.passthrough;
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(initial_backoff * (1 << (attempt - 1)));
      }
      ++attempts;
      httplib::Result result;
      {
        SlotGuard guard(slots);
        httplib::Client client(config.endpoint);
        const auto secs = static_cast<time_t>(config.timeout_seconds);
        const auto usecs = static_cast<time_t>(
            (config.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        result = client.Post(path, payload, "application/json");
      }
      if (!result) {
        last_error = "transport failure on " + path + ": " +
                     httplib::to_string(result.error());
        continue;
      }
      const int status = result->status;
      if (status >= 500) {
        last_error = "server error " + std::to_string(status) + " on " + path;
        continue;
      }
      std::string message;
      if (status >= 400) {
        auto err = json::parse(result->body, nullptr, false);
        message = err.is_object() && err.contains("error") &&
                          err["error"].is_string()
                      ? err["error"].get<std::string>()
                      : result->body;
      }
      if (status == 404 || status == 501) {
        throw Error(ErrorCode::kCapability,
                    config.endpoint + " does not support " + path);
      }
      if (status >= 400) {
        throw InputError("provider rejected request to " + path + ": " +
                         message);
      }
      auto parsed = json::parse(result->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) {
        throw Error(ErrorCode::kData, "malformed JSON response from " + path);
      }
      return parsed;
    }
    throw Error(ErrorCode::kTransport,
                last_error + " (after " + std::to_string(kMaxAttempts) +
                    " attempts)");
  }
};

namespace {

std::vector<TokenId> IdsField(const json& body, const char* field) {
  if (!body.contains(field) || !body[field].is_array()) {
    throw Error(ErrorCode::kData,
                std::string("response missing array '") + field + "'");
  }
  std::vector<TokenId> ids;
  ids.reserve(body[field].size());
  for (const auto& v : body[field]) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0) {
      throw Error(ErrorCode::kData, "token ids must be non-negative integers");
    }
    ids.push_back(v.get<TokenId>());
  }
  return ids;
}

}  // namespace

RemoteProvider::RemoteProvider(const ProviderConfig& config,
                               std::chrono::milliseconds initial_backoff)
    : id_("remote:" + config.endpoint),
      impl_(std::make_unique<Impl>(config, initial_backoff)) {
  if (config.kind != ProviderConfig::Kind::kRemote) {
    throw Error(ErrorCode::kConfig, "RemoteProvider needs a remote config");
  }
  config.Validate();
}

RemoteProvider::~RemoteProvider() = default;

TokenSequence RemoteProvider::Tokenize(std::string_view text) const {
  json response =
      impl_->Post("/v1/tokenize", json{{"text", std::string(text)}}, attempts_);
  TokenSequence out;
  out.ids = IdsField(response, "ids");
  out.provider_id = response.value("provider_id", id_);
  return out;
}

TokenScores RemoteProvider::Score(const TokenSequence& tokens,
                                  const TokenSequence& context) const {
  if (tokens.empty()) throw InputError("cannot score an empty sequence");
  json body{{"ids", tokens.ids}};
  if (!context.empty()) body["context_ids"] = context.ids;
  json response = impl_->Post("/v1/logprobs", std::move(body), attempts_);
  if (!response.contains("logprobs") || !response["logprobs"].is_array()) {
    throw Error(ErrorCode::kData, "response missing array 'logprobs'");
  }
  TokenScores out;
  out.context_len = context.size();
  for (const auto& v : response["logprobs"]) {
    if (!v.is_number()) {
      throw Error(ErrorCode::kData, "logprobs must be numbers");
    }
    const double lp = v.get<double>();
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorCode::kData, "logprob outside (-inf, 0]");
    }
    out.logprobs.push_back(lp);
  }
  if (out.logprobs.size() != tokens.size()) {
    throw Error(ErrorCode::kData, "server returned " +
                                      std::to_string(out.logprobs.size()) +
                                      " logprobs for " +
                                      std::to_string(tokens.size()) + " ids");
  }
  return out;
}

Generation RemoteProvider::Sample(const TokenSequence& prompt,
                                  const SamplingParams& params) const {
  json body{{"prompt_ids", prompt.ids},
            {"max_new", params.max_new},
            {"top_k", params.top_k},
            {"temperature", params.temperature},
            {"seed", params.seed}};
  json response = impl_->Post("/v1/sample", std::move(body), attempts_);
  Generation out;
  out.tokens.ids = IdsField(response, "ids");
  out.tokens.provider_id =
      prompt.provider_id.empty() ? id_ : prompt.provider_id;
  if (!response.contains("text") || !response["text"].is_string()) {
    throw Error(ErrorCode::kData, "response missing string 'text'");
  }
  out.text = response["text"].get<std::string>();
  return out;
}

}  // namespace trapkit
