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

#ifndef TRAPKIT_TRAP_GEN_H_
#define TRAPKIT_TRAP_GEN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trapkit/provider.h"

namespace trapkit {

// Perplexity buckets: bucket i (1-based) covers
// [floor + (i-1) * width, floor + i * width).
struct BucketSpec {
  int count = 10;
  double width = 10.0;
  double floor = 1.0;
};

// nullopt when the perplexity lies above the last bucket. Throws kInput for
// perplexity < 1 (or NaN).
std::optional<int> BucketOf(double perplexity, const BucketSpec& spec = {});

enum class TrapKind { kSynthetic, kReal };

struct TrapSequence {
  std::string id;
  std::string text;
  TokenSequence tokens;  // under the reference provider
  double perplexity = 0.0;
  std::optional<int> bucket;
  TrapKind kind = TrapKind::kSynthetic;
  std::optional<double> temperature;  // synthetic only
  std::string source_doc;             // real only
  uint64_t seed = 0;
  // Set by the experiment layer, never at generation.
  bool member = false;

  size_t length() const { return tokens.size(); }
};

std::vector<double> DefaultTemperatures();  // 0.5, 1.0, ..., 8.0

struct SyntheticOptions {
  size_t target_len = 50;
  size_t top_k = 50;
  std::vector<double> temperatures = DefaultTemperatures();
  int quota_per_bucket = 50;
  BucketSpec spec;
  uint64_t seed = 0;
  uint64_t max_attempts = 0;  // 0: 200 * quota * bucket count
  int workers = 1;
};

struct RealOptions {
  size_t target_len = 50;
  int quota_per_bucket = 50;
  BucketSpec spec;
  uint64_t seed = 0;
  uint64_t max_attempts = 0;  // 0: 200 * quota * bucket count
};

struct GenerationReport {
  std::vector<TrapSequence> traps;  // admission order
  std::vector<int> per_bucket;      // admitted count, index 0 = bucket 1
  std::vector<int> shortfall;       // quota - admitted, per bucket
  uint64_t attempts = 0;
  uint64_t out_of_range = 0;
  uint64_t bucket_full = 0;
  uint64_t rejected = 0;  // wrong length, invalid UTF-8, duplicate window

  bool complete() const;
  int total_shortfall() const;
};

// Samples from an empty prompt, cycling temperatures round-robin per
// attempt; attempt a uses seed DeriveSeed(seed, a). Each candidate keeps
// exactly target_len tokens and is bucketed by the reference perplexity of
// those ids. Stops when every bucket holds quota_per_bucket traps or the
// attempt budget is spent; a shortfall is reported, never padded.
GenerationReport GenerateSynthetic(const Provider& reference,
                                   const SyntheticOptions& options);

// Uniformly random windows of exactly target_len reference tokens from one
// document, bucketed like GenerateSynthetic. Throws kInput if the document
// is shorter than target_len tokens and kCapability if the reference
// provider cannot detokenize.
GenerationReport SampleReal(std::string_view doc_id, std::string_view doc_text,
                            const Provider& reference,
                            const RealOptions& options);

// Trims both sets so each bucket holds min(count_a, count_b) traps, keeping
// the earliest admitted ones.
void MatchStratification(std::vector<TrapSequence>& a,
                         std::vector<TrapSequence>& b);

nlohmann::json ToJson(const TrapSequence& trap);
TrapSequence TrapFromJson(const nlohmann::json& j);

// JSONL: a header line {"format": "trapkit.traps", "version": 1, "config":
// ...}, then one trap per line.
void WriteTrapSet(const std::filesystem::path& path,
                  const std::vector<TrapSequence>& traps,
                  const nlohmann::json& config);

struct TrapSet {
  nlohmann::json config;
  std::vector<TrapSequence> traps;
};
TrapSet ReadTrapSet(const std::filesystem::path& path);

}  // namespace trapkit

#endif  // TRAPKIT_TRAP_GEN_H_
