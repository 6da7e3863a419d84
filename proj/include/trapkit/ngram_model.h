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

#ifndef TRAPKIT_NGRAM_MODEL_H_
#define TRAPKIT_NGRAM_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trapkit/provider.h"

namespace trapkit {

// Interpolated add-alpha n-gram model over bytes:
//
//   P_m(t | c_m) = (count(c_m, t) + alpha * P_{m-1}(t | c_{m-1}))
//                  / (total(c_m) + alpha),       P_{-1}(t) = 1 / 256
//
// where c_m is the last m context tokens and m runs from 0 up to
// min(order - 1, |context|). A level whose context was never seen
// (total = 0) leaves the lower-order estimate unchanged.
//
// Frozen models are immutable: counts live in sorted arrays and are shared
// between snapshots through shared_ptr<const NGramModel>.
class NGramModel {
 public:
  static constexpr int kVocabSize = 256;
  static constexpr int kMaxOrder = 7;

  // Untrained model: every conditional is exactly 1/256.
  NGramModel(int order, double alpha);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  size_t num_count_entries() const { return counts_.size(); }

  // Only the last (order - 1) context tokens are used.
  double ConditionalProb(std::span<const TokenId> context, TokenId token) const;

  // Natural-log next-token distribution, out.size() == kVocabSize.
  void NextTokenLogProbs(std::span<const TokenId> context,
                         std::span<double> out) const;

  uint64_t Count(std::span<const TokenId> context, TokenId token) const;
  uint64_t Total(std::span<const TokenId> context) const;

  bool operator==(const NGramModel& other) const;

  // Versioned binary container: magic, order, alpha bits, vocab size, step,
  // then the sorted count and total tables. Doubles are stored by bit
  // pattern so a round trip is exact.
  void Save(const std::filesystem::path& path, uint64_t step) const;
  static std::pair<std::shared_ptr<const NGramModel>, uint64_t> Load(
      const std::filesystem::path& path);

 private:
  friend class NGramTrainer;
  using Entry = std::pair<uint64_t, uint64_t>;  // packed key, count

  uint64_t Lookup(const std::vector<Entry>& table, uint64_t key) const;
  // Fills counts for all 256 successors of the packed context.
  void SuccessorCounts(uint64_t context_key, std::span<uint64_t> out) const;

  int order_;
  double alpha_;
  std::vector<Entry> counts_;  // (context, token) -> count
  std::vector<Entry> totals_;  // context -> sum of successor counts
};

// Packs the last `length` tokens of `context` into a table key; the token
// occupies the low byte, the context bytes the next 48 bits and the context
// length the top byte.
uint64_t PackContext(std::span<const TokenId> context, size_t length);

// Accumulates counts. Single writer; Freeze() produces an independent
// immutable copy.
class NGramTrainer {
 public:
  NGramTrainer(int order, double alpha);

  // Counts position `i` of `doc` at every order 1..order. Context never
  // reaches before the start of `doc`.
  void CountPosition(std::span<const TokenId> doc, size_t i);
  void AddDocument(std::span<const TokenId> doc);

  std::shared_ptr<const NGramModel> Freeze() const;

 private:
  int order_;
  double alpha_;
  std::unordered_map<uint64_t, uint64_t> counts_;
  std::unordered_map<uint64_t, uint64_t> totals_;
};

struct ProviderSnapshot {
  uint64_t step = 0;  // training tokens consumed
  std::shared_ptr<const NGramModel> model;
};

struct TrainOptions {
  int order = 4;
  double alpha = 0.5;
  uint64_t checkpoint_every = 0;  // 0: final snapshot only
  uint64_t seed = 0;
  int epochs = 1;
};

// Shuffles document order by seed (reshuffled per epoch), consumes every
// document once per epoch and returns snapshots at every checkpoint_every
// consumed tokens plus a final snapshot; steps are strictly increasing.
std::vector<ProviderSnapshot> Train(std::span<const std::string> corpus,
                                    const TrainOptions& options);

TokenSequence BytesToTokens(std::string_view text);

}  // namespace trapkit

#endif  // TRAPKIT_NGRAM_MODEL_H_
