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

#ifndef TRAPKIT_CONFIG_H_
#define TRAPKIT_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trapkit/mia.h"
#include "trapkit/provider.h"
#include "trapkit/trap_gen.h"

namespace trapkit {

struct Seeds {
  uint64_t split = 0;
  uint64_t generation = 0;
  uint64_t nonmember_generation = 0;
  uint64_t control_generation = 0;
  uint64_t injection = 0;
  uint64_t mia = 0;
  uint64_t eval = 0;
  uint64_t training = 0;
  uint64_t toy_corpus = 0;
  uint64_t toy_reference = 0;
};

struct ToyConfig {
  int order = 4;
  double alpha = 0.5;
  int epochs = 1;
  uint64_t checkpoint_every = 0;
  bool separate_runs = false;  // one target per n_rep value
  uint64_t lexicon_seed = 0;
  size_t lexicon_size = 2000;
  size_t docs = 0;  // synthetic corpus size when no corpus paths are given
  size_t words_per_doc = 2000;
  size_t reference_docs = 200;
};

struct DocMiaConfig {
  bool enabled = false;
  size_t excerpt_len = 512;
  size_t n_excerpts = 100;
  double k = kDefaultMinK;
  double calibration_fraction = 0.5;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  int workers = 1;
  std::string out;
  ProviderConfig target;
  ProviderConfig reference;

  std::vector<std::string> corpus_paths;
  size_t min_tokens = 5000;
  size_t n_members = 500;
  size_t n_nonmembers = 500;
  size_t n_injected = 7500;

  std::vector<size_t> lengths;
  size_t top_k = 50;
  std::vector<double> temperatures;
  int quota_per_bucket = 50;
  BucketSpec buckets;
  uint64_t max_attempts = 0;
  bool control = true;  // never-injected traps scored as a sanity cell

  std::vector<int> n_reps;

  std::vector<Method> methods;
  double k = kDefaultMinK;
  size_t ctx_len = 100;

  DocMiaConfig doc_mia;

  int n_perm = 10000;
  int bootstrap = 1000;

  ToyConfig toy;
  Seeds seeds;

  // Fully resolved configuration, every seed explicit.
  nlohmann::json echo;
};

// Every key with its default.
nlohmann::json DefaultConfig();

// "a.b.c=value": value is parsed as JSON when possible, else taken as a
// string. Throws kConfig for a malformed assignment.
void ApplyAssignment(nlohmann::json& config, std::string_view assignment);

// Deep merge of `user` over DefaultConfig(). Unknown keys are kConfig
// errors naming the full path.
nlohmann::json MergeWithDefaults(const nlohmann::json& user);

// Validates a merged configuration. Null seeds are derived from "seed".
// Remote providers without an endpoint fall back to TRAPKIT_ENDPOINT.
// Throws kConfig with the offending field path.
ExperimentConfig ParseConfig(const nlohmann::json& merged);

}  // namespace trapkit

#endif  // TRAPKIT_CONFIG_H_
