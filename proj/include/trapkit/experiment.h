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

#ifndef TRAPKIT_EXPERIMENT_H_
#define TRAPKIT_EXPERIMENT_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trapkit/config.h"
#include "trapkit/eval.h"
#include "trapkit/event_log.h"
#include "trapkit/mia.h"
#include "trapkit/provider.h"
#include "trapkit/trap_gen.h"

namespace trapkit {

// The reference provider of an experiment. A builtin reference without a
// model file is trained on toy.reference_docs synthetic documents drawn
// independently of the corpus (uniform when that count is 0); the model
// is saved to `save_path` when given.
std::unique_ptr<Provider> BuildReference(
    const ExperimentConfig& config, EventLog& log,
    const std::optional<std::filesystem::path>& save_path = std::nullopt);

// Synthetic traps of one length, with per-stage seed and the generation
// settings of `config`.
GenerationReport GenerateTraps(const ExperimentConfig& config,
                               const Provider& reference, size_t length,
                               uint64_t seed);

// Interleaves traps bucket by bucket (first of each bucket, then second of
// each, ...) so any prefix is close to stratified.
std::vector<TrapSequence> InterleaveByBucket(const std::vector<TrapSequence>& traps);

// Drops traps whose text already appeared earlier in `pool` or in `taken`,
// then adds the survivors to `taken`.
std::vector<TrapSequence> DropRepeatedTexts(std::vector<TrapSequence> pool,
                                            std::vector<std::string>& taken);

struct CellResult {
  std::string run;
  size_t length = 0;
  int n_rep = 0;         // 0 for control cells
  bool control = false;  // never-injected traps labelled as members
  std::vector<MembershipRecord> records;
  std::vector<EvaluationReport> reports;  // one per configured method

  const EvaluationReport* Find(Method method) const;
  std::string Name() const;
};

struct DocMiaResult {
  std::string run;
  double threshold = 0.0;
  size_t n_calibration = 0;
  EvaluationReport report;
};

struct ExperimentResult {
  std::string manifest_id;
  std::vector<CellResult> cells;
  std::optional<DocMiaResult> doc_mia;
  nlohmann::json report;
};

// The full pipeline: corpus, role split, trap generation, injection,
// target training (builtin targets without a model file), scoring and
// evaluation. Writes every artifact under config.out as it goes, so a
// failure leaves completed stages on disk.
ExperimentResult RunExperiment(const ExperimentConfig& config, EventLog& log);

}  // namespace trapkit

#endif  // TRAPKIT_EXPERIMENT_H_
