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

#ifndef TRAPKIT_PROVIDER_H_
#define TRAPKIT_PROVIDER_H_

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trapkit {

using TokenId = uint32_t;

// Token ids plus the tokenizer that produced them. Ids from different
// providers must never be mixed.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::string provider_id;

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::span<const TokenId> span() const { return ids; }
};

// Natural-log probability of each scored token; context tokens are
// conditioned on but not scored.
struct TokenScores {
  std::vector<double> logprobs;
  size_t context_len = 0;
};

struct SamplingParams {
  size_t max_new = 1;
  size_t top_k = 50;
  double temperature = 1.0;
  uint64_t seed = 0;
};

struct Generation {
  TokenSequence tokens;
  std::string text;
};

// Black-box autoregressive language model. Implementations are read-only
// after construction and safe to call from many threads.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual const std::string& id() const = 0;

  virtual TokenSequence Tokenize(std::string_view text) const = 0;

  // logprobs[i] = log P(tokens[i] | context ++ tokens[0..i)).
  // An empty `context` means unconditioned scoring.
  virtual TokenScores Score(const TokenSequence& tokens,
                            const TokenSequence& context) const = 0;

  // Top-k / temperature sampling from `prompt`. Returns exactly
  // params.max_new tokens unless the provider emits end-of-text first.
  virtual Generation Sample(const TokenSequence& prompt,
                            const SamplingParams& params) const = 0;

  // Text of `tokens`, when the provider can reconstruct it locally.
  virtual std::optional<std::string> Detokenize(
      const TokenSequence& tokens) const {
    (void)tokens;
    return std::nullopt;
  }

  TokenScores Score(const TokenSequence& tokens) const {
    return Score(tokens, TokenSequence{{}, id()});
  }
};

// -mean(logprobs). Throws on empty input.
double MeanNegativeLogprob(std::span<const double> logprobs);

double SequenceLoss(const Provider& provider, const TokenSequence& tokens,
                    const TokenSequence& context);
double SequenceLoss(const Provider& provider, const TokenSequence& tokens);

inline double PerplexityFromLoss(double loss) { return std::exp(loss); }

// Samples until a generation of exactly params.max_new tokens is produced.
// A short (end-of-text) generation is discarded and redrawn with seed
// DeriveSeed(params.seed, attempt) for attempt = 1, 2, ...
Generation SampleExact(const Provider& provider, const TokenSequence& prompt,
                       const SamplingParams& params, int max_resamples = 32);

// Shared top-k / temperature draw over a full next-token distribution given
// as natural-log probabilities. Candidates are ordered by probability
// (ties: lower id first), the first top_k are kept, each weight is
// p^(1/temperature) normalised, and a single Uniform01() draw u selects the
// first candidate whose cumulative weight exceeds u * total.
TokenId DrawTopK(std::span<const double> logprobs, size_t top_k,
                 double temperature, double uniform01);

struct ProviderConfig {
  enum class Kind { kBuiltin, kRemote };
  Kind kind = Kind::kBuiltin;
  std::string endpoint;       // remote only
  std::string model_path;     // builtin only; empty = untrained model
  double timeout_seconds = 60.0;
  int max_parallel = 4;
  std::map<std::string, std::string> passthrough;

  // Throws kConfig when endpoint presence does not match kind.
  void Validate() const;
};

std::unique_ptr<Provider> MakeProvider(const ProviderConfig& config);

}  // namespace trapkit

#endif  // TRAPKIT_PROVIDER_H_
