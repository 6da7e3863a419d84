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

#ifndef TRAPKIT_MIA_H_
#define TRAPKIT_MIA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trapkit/injector.h"
#include "trapkit/provider.h"

namespace trapkit {

enum class Method { kLoss, kMinK, kRatio, kRatioCtx, kDocMinK };
enum class Orientation { kHigherIsMember, kLowerIsMember };

Orientation OrientationOf(Method method);
std::string MethodName(Method method);
Method ParseMethod(std::string_view name);  // throws kInput
std::string OrientationName(Orientation orientation);

struct AttackScore {
  Method method = Method::kLoss;
  double value = 0.0;
  Orientation orientation = Orientation::kLowerIsMember;
  nlohmann::json params = nlohmann::json::object();
};

constexpr double kDefaultMinK = 20.0;

AttackScore LossAttack(const Provider& target, const TokenSequence& x);

// Mean of the E = max(1, ceil(k/100 * n)) smallest logprobs. Ties at the
// cut are taken lowest index first.
double MinKOfLogprobs(std::span<const double> logprobs, double k);

AttackScore MinKProb(const Provider& target, const TokenSequence& x,
                     double k = kDefaultMinK);

// loss_target / loss_ref. Throws kDegenerate when loss_ref is 0.
AttackScore RatioAttack(const Provider& target, const Provider& reference,
                        const TokenSequence& x_target,
                        const TokenSequence& x_ref);

// Tokenizes `text` with each provider, then RatioAttack.
AttackScore RatioAttackText(const Provider& target, const Provider& reference,
                            std::string_view text);

// The longest suffix of prefix that `counter` tokenizes to at most ctx_len
// tokens, cut at a UTF-8 boundary. Empty when ctx_len is 0.
std::string ContextSuffix(const Provider& counter, std::string_view prefix,
                          size_t ctx_len);

// Ratio of loss(text | context) under target and reference, each provider
// tokenizing both strings itself.
AttackScore RatioWithContextText(const Provider& target,
                                 const Provider& reference,
                                 std::string_view text,
                                 std::string_view context);

// Picks one recorded occurrence by seed and conditions on the ctx_len
// reference tokens of the original document preceding it (the separating
// space included). Throws kInput when the original document is missing or
// does not match the record.
AttackScore RatioWithContext(const Provider& target, const Provider& reference,
                             const InjectionRecord& record,
                             std::string_view original_doc, size_t ctx_len,
                             uint64_t seed);

// Context for a non-member: the text before a uniformly random word gap of
// a non-member document, measured like RatioWithContext.
std::string NonMemberContext(const Provider& reference, std::string_view doc,
                             size_t ctx_len, uint64_t seed);

// Min-K% values of n_excerpts uniformly random windows of excerpt_len
// target tokens. Throws kInput when the document is too short.
std::vector<double> ExcerptMinKScores(const Provider& target,
                                      std::string_view doc, size_t excerpt_len,
                                      size_t n_excerpts, double k,
                                      uint64_t seed);

// Fraction of excerpts whose Min-K% value exceeds threshold.
AttackScore DocMinK(const Provider& target, std::string_view doc,
                    size_t excerpt_len, size_t n_excerpts, double k,
                    double threshold, uint64_t seed);

// Dispatch for the context-free text methods: loss, min_k and ratio.
// `reference` is required for ratio. Throws kInput for other methods.
AttackScore ScoreText(Method method, const Provider& target,
                      const Provider* reference, std::string_view text,
                      double k = kDefaultMinK);

struct MembershipRecord {
  std::string ref;  // trap id or excerpt/document id
  bool member = false;
  std::vector<AttackScore> scores;
  std::optional<int> bucket;
  size_t length = 0;
  int n_rep = 0;

  // Throws kInput if a score for the same method is already present.
  void AddScore(AttackScore score);
  const AttackScore* Find(Method method) const;
};

nlohmann::json ToJson(const AttackScore& score);
AttackScore AttackScoreFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const MembershipRecord& record);
MembershipRecord MembershipRecordFromJson(const nlohmann::json& j);

// JSONL with a {"format": "trapkit.scores", ...} header line.
void WriteScores(const std::filesystem::path& path,
                 const std::vector<MembershipRecord>& records,
                 const nlohmann::json& config);

struct ScoreSet {
  nlohmann::json config;
  std::vector<MembershipRecord> records;
};
// Throws kInput when the file holds no records.
ScoreSet ReadScores(const std::filesystem::path& path);

}  // namespace trapkit

#endif  // TRAPKIT_MIA_H_
