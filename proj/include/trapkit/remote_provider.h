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

#ifndef TRAPKIT_REMOTE_PROVIDER_H_
#define TRAPKIT_REMOTE_PROVIDER_H_

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "trapkit/provider.h"

namespace trapkit {

// Client for the HTTP/JSON provider protocol:
//
//   POST /v1/tokenize  {"text"}                        -> {"ids", "provider_id"}
//   POST /v1/logprobs  {"ids", "context_ids"?}         -> {"logprobs"}
//   POST /v1/sample    {"prompt_ids", "max_new", "top_k",
//                       "temperature", "seed"}         -> {"ids", "text"}
//
// HTTP 400 carries {"error"} and maps to kInput (never retried). Connection
// failures and 5xx are retried up to three attempts in total with
// exponential backoff. At most max_parallel requests are in flight.
// Non-empty passthrough settings are sent as an "options" object.
class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(
      const ProviderConfig& config,
      std::chrono::milliseconds initial_backoff = std::chrono::milliseconds(100));
  ~RemoteProvider() override;

  const std::string& id() const override { return id_; }
  TokenSequence Tokenize(std::string_view text) const override;
  TokenScores Score(const TokenSequence& tokens,
                    const TokenSequence& context) const override;
  Generation Sample(const TokenSequence& prompt,
                    const SamplingParams& params) const override;
  using Provider::Score;

  // Total HTTP attempts issued, including retries.
  uint64_t attempts() const { return attempts_.load(); }

  static constexpr int kMaxAttempts = 3;

 private:
  struct Impl;
  std::string id_;
  std::unique_ptr<Impl> impl_;
  mutable std::atomic<uint64_t> attempts_{0};
};

}  // namespace trapkit

#endif  // TRAPKIT_REMOTE_PROVIDER_H_
