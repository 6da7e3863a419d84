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

#ifndef TRAPKIT_ERROR_H_
#define TRAPKIT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace trapkit {

enum class ErrorCode {
  kInput,       // caller supplied an invalid argument or document
  kTransport,   // remote provider unreachable or 5xx; retriable
  kCapability,  // provider lacks the requested operation
  kIntegrity,   // stored artifact does not match what it describes
  kDegenerate,  // mathematically undefined result (zero reference loss, ...)
  kConfig,      // invalid experiment configuration
  kData,        // malformed or missing data file
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  bool retriable() const { return code_ == ErrorCode::kTransport; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline Error InputError(const std::string& message) {
  return Error(ErrorCode::kInput, message);
}

}  // namespace trapkit

#endif  // TRAPKIT_ERROR_H_
