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

#ifndef TRAPKIT_BUILTIN_PROVIDER_H_
#define TRAPKIT_BUILTIN_PROVIDER_H_

#include <memory>
#include <string>

#include "trapkit/ngram_model.h"
#include "trapkit/provider.h"

namespace trapkit {

// Byte-level provider over a frozen NGramModel. Token ids are byte values;
// there is no end-of-text token, so Sample always returns max_new tokens.
class BuiltinProvider final : public Provider {
 public:
  static constexpr const char* kTokenizerId = "builtin-byte";

  explicit BuiltinProvider(std::shared_ptr<const NGramModel> model);

  // Untrained model: uniform over all 256 bytes.
  static std::unique_ptr<BuiltinProvider> Uniform(int order = 4,
                                                  double alpha = 0.5);

  const std::string& id() const override { return id_; }
  TokenSequence Tokenize(std::string_view text) const override;
  TokenScores Score(const TokenSequence& tokens,
                    const TokenSequence& context) const override;
  Generation Sample(const TokenSequence& prompt,
                    const SamplingParams& params) const override;
  std::optional<std::string> Detokenize(
      const TokenSequence& tokens) const override;
  using Provider::Score;

  const NGramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NGramModel> model_;
  std::string id_ = kTokenizerId;
};

}  // namespace trapkit

#endif  // TRAPKIT_BUILTIN_PROVIDER_H_
