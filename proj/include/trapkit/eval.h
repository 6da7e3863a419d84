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

#ifndef TRAPKIT_EVAL_H_
#define TRAPKIT_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trapkit/mia.h"
#include "trapkit/ngram_model.h"

namespace trapkit {

// Mann-Whitney AUC: the probability that a random member outranks a random
// non-member in the member direction, ties counting one half. The
// lower_is_member value is computed as 1 - (higher_is_member value).
// Throws kInput when either side is empty.
double Auc(std::span<const double> members, std::span<const double> nonmembers,
           Orientation orientation);

struct BucketAuc {
  int bucket = 0;
  std::optional<double> auc;  // undefined when one side is empty
  size_t n_members = 0;
  size_t n_nonmembers = 0;
};

// Scores of `method` on member / non-member records. Throws kInput when a
// record lacks a score for the method.
void SplitScores(const std::vector<MembershipRecord>& records, Method method,
                 std::vector<double>& members, std::vector<double>& nonmembers);

// One entry per bucket present in the records, ascending. Records without
// a bucket are skipped.
std::vector<BucketAuc> BucketedAuc(const std::vector<MembershipRecord>& records,
                                   Method method);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  int n_perm = 0;
};

// Sample Pearson coefficient. Throws kDegenerate for a constant series and
// kInput when sizes differ or n < 3.
double PearsonR(std::span<const double> xs, std::span<const double> ys);

// Two-sided permutation test: p = (1 + #{|r_perm| >= |r_obs|}) / (n_perm + 1)
// over n_perm seeded shuffles of ys.
PearsonResult PearsonPerm(std::span<const double> xs,
                          std::span<const double> ys, int n_perm,
                          uint64_t seed);

// Accuracy of "member iff score > t" (higher_is_member) or "score < t".
double Accuracy(std::span<const double> scores, const std::vector<bool>& labels,
                double threshold, Orientation orientation);

// Threshold maximizing Accuracy; the midpoint of the widest maximizing gap
// between adjacent distinct scores. When only the open ends maximize, the
// lowest score - 1 or the highest score + 1. Throws kInput unless both
// labels are present.
double ThresholdMaxAccuracy(std::span<const double> scores,
                            const std::vector<bool>& labels,
                            Orientation orientation);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double std_dev = 0.0;
  int resamples = 0;
};

// Percentile bootstrap of Auc, resampling each side with replacement.
ConfidenceInterval BootstrapAuc(std::span<const double> members,
                                std::span<const double> nonmembers,
                                Orientation orientation, int resamples,
                                uint64_t seed, double level = 0.95);

struct CheckpointAuc {
  uint64_t step = 0;
  double auc = 0.0;
};

// AUC of a context-free text method at every snapshot over the same member
// and non-member texts, ordered by step. Throws kInput for fewer than two
// snapshots.
std::vector<CheckpointAuc> CheckpointCurve(
    const std::vector<ProviderSnapshot>& snapshots, const Provider* reference,
    const std::vector<std::string>& members,
    const std::vector<std::string>& nonmembers, Method method,
    double k = kDefaultMinK, int workers = 1);

struct EvalOptions {
  int n_perm = 10000;
  int bootstrap = 1000;
  uint64_t seed = 0;
};

struct EvaluationReport {
  Method method = Method::kLoss;
  double auc = 0.5;
  size_t n_members = 0;
  size_t n_nonmembers = 0;
  std::optional<ConfidenceInterval> ci;
  std::vector<BucketAuc> per_bucket;
  std::vector<CheckpointAuc> per_checkpoint;
  // Bucket index against per-bucket AUC over the defined buckets.
  std::optional<PearsonResult> pearson;
  std::string pearson_note;  // why pearson is absent, when it is
  nlohmann::json config = nlohmann::json::object();
};

EvaluationReport Evaluate(const std::vector<MembershipRecord>& records,
                          Method method, const EvalOptions& options);

nlohmann::json ToJson(const EvaluationReport& report);

// step,auc
void WriteCheckpointCsv(const std::filesystem::path& path,
                        const std::vector<CheckpointAuc>& curve);
// bucket,auc,n_members,n_nonmembers (auc empty when undefined)
void WriteBucketCsv(const std::filesystem::path& path,
                    const std::vector<BucketAuc>& buckets);

}  // namespace trapkit

#endif  // TRAPKIT_EVAL_H_
