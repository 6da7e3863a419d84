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

#include "trapkit/builtin_provider.h"

#include <cmath>
#include <vector>

#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

void CheckIds(const TokenSequence& seq, const std::string& provider_id) {
  if (!seq.provider_id.empty() && seq.provider_id != provider_id) {
    throw InputError("token sequence from tokenizer '" + seq.provider_id +
                     "' passed to provider '" + provider_id + "'");
  }
  for (TokenId t : seq.ids) {
    if (t >= NGramModel::kVocabSize) {
      throw InputError("token id " + std::to_string(t) +
                       " outside byte vocabulary");
    }
  }
}

}  // namespace

BuiltinProvider::BuiltinProvider(std::shared_ptr<const NGramModel> model)
    : model_(std::move(model)) {
  if (!model_) throw InputError("builtin provider needs a model");
}

std::unique_ptr<BuiltinProvider> BuiltinProvider::Uniform(int order,
                                                          double alpha) {
  return std::make_unique<BuiltinProvider>(
      std::make_shared<const NGramModel>(order, alpha));
}

TokenSequence BuiltinProvider::Tokenize(std::string_view text) const {
  if (!IsValidUtf8(text)) throw InputError("text is not valid UTF-8");
  TokenSequence out = BytesToTokens(text);
  out.provider_id = id_;
  return out;
}

std::optional<std::string> BuiltinProvider::Detokenize(
    const TokenSequence& tokens) const {
  CheckIds(tokens, id_);
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens.ids) out.push_back(static_cast<char>(t));
  return out;
}

TokenScores BuiltinProvider::Score(const TokenSequence& tokens,
                                   const TokenSequence& context) const {
  if (tokens.empty()) throw InputError("cannot score an empty sequence");
  CheckIds(tokens, id_);
  CheckIds(context, id_);
  // Only the trailing (order - 1) context tokens can influence scores.
  const size_t keep = std::min<size_t>(context.size(), model_->order() - 1);
  std::vector<TokenId> stream(context.ids.end() - keep, context.ids.end());
  stream.insert(stream.end(), tokens.ids.begin(), tokens.ids.end());
  const std::span<const TokenId> all(stream);
  TokenScores out;
  out.context_len = context.size();
  out.logprobs.reserve(tokens.size());
  for (size_t i = keep; i < stream.size(); ++i) {
    out.logprobs.push_back(
        std::log(model_->ConditionalProb(all.first(i), stream[i])));
  }
  return out;
}

Generation BuiltinProvider::Sample(const TokenSequence& prompt,
                                   const SamplingParams& params) const {
  CheckIds(prompt, id_);
  if (params.max_new == 0) throw InputError("max_new must be positive");
  if (params.top_k == 0 || params.top_k > NGramModel::kVocabSize) {
    throw InputError("top_k must be in [1, 256], got " +
                     std::to_string(params.top_k));
  }
  if (!(params.temperature > 0.0) || !std::isfinite(params.temperature)) {
    throw InputError("temperature must be positive and finite");
  }
  SplitMix64 rng(params.seed);
  std::vector<TokenId> stream = prompt.ids;
  std::vector<double> logprobs(NGramModel::kVocabSize);
  Generation out;
  out.tokens.provider_id = id_;
  for (size_t n = 0; n < params.max_new; ++n) {
    model_->NextTokenLogProbs(stream, logprobs);
    const TokenId next =
        DrawTopK(logprobs, params.top_k, params.temperature, rng.Uniform01());
    stream.push_back(next);
    out.tokens.ids.push_back(next);
    out.text.push_back(static_cast<char>(next));
  }
  return out;
}

}  // namespace trapkit
