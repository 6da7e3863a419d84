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

#include "trapkit/provider.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "trapkit/builtin_provider.h"
#include "trapkit/error.h"
#include "trapkit/ngram_model.h"
#include "trapkit/remote_provider.h"
#include "trapkit/rng.h"

namespace trapkit {

double MeanNegativeLogprob(std::span<const double> logprobs) {
  if (logprobs.empty()) throw InputError("loss of an empty sequence");
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  // Normalize -0.0.
  const double loss = -sum / static_cast<double>(logprobs.size());
  return loss == 0.0 ? 0.0 : loss;
}

double SequenceLoss(const Provider& provider, const TokenSequence& tokens,
                    const TokenSequence& context) {
  return MeanNegativeLogprob(provider.Score(tokens, context).logprobs);
}

double SequenceLoss(const Provider& provider, const TokenSequence& tokens) {
  return MeanNegativeLogprob(provider.Score(tokens).logprobs);
}

Generation SampleExact(const Provider& provider, const TokenSequence& prompt,
                       const SamplingParams& params, int max_resamples) {
  SamplingParams attempt_params = params;
  for (int attempt = 0; attempt <= max_resamples; ++attempt) {
    if (attempt > 0) {
      attempt_params.seed =
          DeriveSeed(params.seed, static_cast<uint64_t>(attempt));
    }
    Generation g = provider.Sample(prompt, attempt_params);
    if (g.tokens.size() >= params.max_new) return g;
  }
  throw Error(ErrorCode::kCapability,
              "provider '" + provider.id() + "' ended every one of " +
                  std::to_string(max_resamples + 1) + " generations early");
}

TokenId DrawTopK(std::span<const double> logprobs, size_t top_k,
                 double temperature, double uniform01) {
  const size_t vocab = logprobs.size();
  if (top_k == 0 || top_k > vocab) {
    throw InputError("top_k must be in [1, vocabulary size]");
  }
  std::vector<TokenId> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                    [&](TokenId a, TokenId b) {
                      if (logprobs[a] != logprobs[b]) {
                        return logprobs[a] > logprobs[b];
                      }
                      return a < b;
                    });
  const double top = logprobs[order[0]];
  std::vector<double> weights(top_k);
  double total = 0.0;
  for (size_t i = 0; i < top_k; ++i) {
    weights[i] = std::exp((logprobs[order[i]] - top) / temperature);
    total += weights[i];
  }
  const double target = uniform01 * total;
  double cumulative = 0.0;
  for (size_t i = 0; i < top_k; ++i) {
    cumulative += weights[i];
    if (cumulative > target) return order[i];
  }
  return order[top_k - 1];
}

void ProviderConfig::Validate() const {
  if (kind == Kind::kRemote && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "remote provider requires an endpoint");
  }
  if (kind == Kind::kBuiltin && !endpoint.empty()) {
    throw Error(ErrorCode::kConfig,
                "builtin provider must not set an endpoint");
  }
  if (max_parallel < 1) {
    throw Error(ErrorCode::kConfig, "max_parallel must be positive");
  }
  if (!(timeout_seconds > 0.0)) {
    throw Error(ErrorCode::kConfig, "timeout must be positive");
  }
}

std::unique_ptr<Provider> MakeProvider(const ProviderConfig& config) {
  config.Validate();
  if (config.kind == ProviderConfig::Kind::kRemote) {
    return std::make_unique<RemoteProvider>(config);
  }
  if (config.model_path.empty()) return BuiltinProvider::Uniform();
  auto [model, step] = NGramModel::Load(config.model_path);
  return std::make_unique<BuiltinProvider>(std::move(model));
}

}  // namespace trapkit
