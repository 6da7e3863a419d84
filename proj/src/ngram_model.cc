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

#include "trapkit/ngram_model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'P', 'K', 'N', 'G', '\0'};
constexpr uint32_t kFormatVersion = 1;

void CheckOrderAlpha(int order, double alpha) {
  if (order < 1 || order > NGramModel::kMaxOrder) {
    throw InputError("n-gram order must be in [1, " +
                     std::to_string(NGramModel::kMaxOrder) + "], got " +
                     std::to_string(order));
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InputError("smoothing alpha must be positive and finite");
  }
}

void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  uint64_t U64() { return Get(8); }
  uint32_t U32() { return static_cast<uint32_t>(Get(4)); }
  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  uint64_t Get(int bytes) {
    if (pos_ + bytes > data_.size()) {
      throw Error(ErrorCode::kData, "truncated model file");
    }
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += bytes;
    return v;
  }

  std::string_view data_;
  size_t pos_ = 0;
};

std::vector<std::pair<uint64_t, uint64_t>> SortedEntries(
    const std::unordered_map<uint64_t, uint64_t>& map) {
  std::vector<std::pair<uint64_t, uint64_t>> out(map.begin(), map.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

uint64_t PackContext(std::span<const TokenId> context, size_t length) {
  uint64_t packed = 0;
  for (size_t j = context.size() - length; j < context.size(); ++j) {
    packed = (packed << 8) | (context[j] & 0xFF);
  }
  return (static_cast<uint64_t>(length) << 56) | (packed << 8);
}

NGramModel::NGramModel(int order, double alpha) : order_(order), alpha_(alpha) {
  CheckOrderAlpha(order, alpha);
}

uint64_t NGramModel::Lookup(const std::vector<Entry>& table,
                            uint64_t key) const {
  auto it = std::lower_bound(
      table.begin(), table.end(), key,
      [](const Entry& e, uint64_t k) { return e.first < k; });
  return (it != table.end() && it->first == key) ? it->second : 0;
}

uint64_t NGramModel::Count(std::span<const TokenId> context,
                           TokenId token) const {
  const size_t m = std::min<size_t>(context.size(), order_ - 1);
  return Lookup(counts_, PackContext(context, m) | (token & 0xFF));
}

uint64_t NGramModel::Total(std::span<const TokenId> context) const {
  const size_t m = std::min<size_t>(context.size(), order_ - 1);
  return Lookup(totals_, PackContext(context, m));
}

double NGramModel::ConditionalProb(std::span<const TokenId> context,
                                   TokenId token) const {
  if (token >= kVocabSize) {
    throw InputError("token id " + std::to_string(token) +
                     " outside byte vocabulary");
  }
  const size_t max_m = std::min<size_t>(context.size(), order_ - 1);
  double p = 1.0 / kVocabSize;
  for (size_t m = 0; m <= max_m; ++m) {
    const uint64_t ctx = PackContext(context, m);
    const uint64_t total = Lookup(totals_, ctx);
    // Longer contexts ending in an unseen one are unseen as well.
    if (total == 0) break;
    const uint64_t count = Lookup(counts_, ctx | token);
    p = (static_cast<double>(count) + alpha_ * p) /
        (static_cast<double>(total) + alpha_);
  }
  return p;
}

void NGramModel::SuccessorCounts(uint64_t context_key,
                                 std::span<uint64_t> out) const {
  std::fill(out.begin(), out.end(), 0);
  auto it = std::lower_bound(
      counts_.begin(), counts_.end(), context_key,
      [](const Entry& e, uint64_t k) { return e.first < k; });
  for (; it != counts_.end() && (it->first & ~0xFFULL) == context_key; ++it) {
    out[it->first & 0xFF] = it->second;
  }
}

void NGramModel::NextTokenLogProbs(std::span<const TokenId> context,
                                   std::span<double> out) const {
  if (out.size() != kVocabSize) {
    throw InputError("output span must hold the full byte vocabulary");
  }
  std::vector<double> p(kVocabSize, 1.0 / kVocabSize);
  std::vector<uint64_t> counts(kVocabSize);
  const size_t max_m = std::min<size_t>(context.size(), order_ - 1);
  for (size_t m = 0; m <= max_m; ++m) {
    const uint64_t ctx = PackContext(context, m);
    const uint64_t total = Lookup(totals_, ctx);
    if (total == 0) break;
    SuccessorCounts(ctx, counts);
    const double denom = static_cast<double>(total) + alpha_;
    for (int t = 0; t < kVocabSize; ++t) {
      p[t] = (static_cast<double>(counts[t]) + alpha_ * p[t]) / denom;
    }
  }
  for (int t = 0; t < kVocabSize; ++t) out[t] = std::log(p[t]);
}

bool NGramModel::operator==(const NGramModel& other) const {
  return order_ == other.order_ &&
         std::bit_cast<uint64_t>(alpha_) ==
             std::bit_cast<uint64_t>(other.alpha_) &&
         counts_ == other.counts_ && totals_ == other.totals_;
}

void NGramModel::Save(const std::filesystem::path& path, uint64_t step) const {
  std::string out(kMagic, sizeof(kMagic));
  PutU32(out, kFormatVersion);
  PutU32(out, static_cast<uint32_t>(order_));
  PutU64(out, std::bit_cast<uint64_t>(alpha_));
  PutU32(out, kVocabSize);
  PutU64(out, step);
  for (const auto* table : {&counts_, &totals_}) {
    PutU64(out, table->size());
    for (const auto& [key, count] : *table) {
      PutU64(out, key);
      PutU64(out, count);
    }
  }
  WriteFile(path, out);
}

std::pair<std::shared_ptr<const NGramModel>, uint64_t> NGramModel::Load(
    const std::filesystem::path& path) {
  const std::string data = ReadFile(path);
  if (data.size() < sizeof(kMagic) ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kData, path.string() + " is not a trapkit model");
  }
  Reader in(std::string_view(data).substr(sizeof(kMagic)));
  const uint32_t version = in.U32();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kData,
                "unsupported model format version " + std::to_string(version));
  }
  const int order = static_cast<int>(in.U32());
  const double alpha = std::bit_cast<double>(in.U64());
  if (in.U32() != kVocabSize) {
    throw Error(ErrorCode::kData, "model vocabulary size is not 256");
  }
  const uint64_t step = in.U64();
  auto model = std::make_shared<NGramModel>(order, alpha);
  for (auto* table : {&model->counts_, &model->totals_}) {
    const uint64_t n = in.U64();
    table->reserve(static_cast<size_t>(n));
    for (uint64_t i = 0; i < n; ++i) {
      const uint64_t key = in.U64();
      table->emplace_back(key, in.U64());
    }
    if (!std::is_sorted(table->begin(), table->end())) {
      throw Error(ErrorCode::kData, "model tables are not sorted");
    }
  }
  if (!in.AtEnd()) {
    throw Error(ErrorCode::kData, "trailing bytes in model file");
  }
  return {std::move(model), step};
}

NGramTrainer::NGramTrainer(int order, double alpha)
    : order_(order), alpha_(alpha) {
  CheckOrderAlpha(order, alpha);
}

void NGramTrainer::CountPosition(std::span<const TokenId> doc, size_t i) {
  const TokenId token = doc[i];
  if (token >= NGramModel::kVocabSize) {
    throw InputError("token id outside byte vocabulary");
  }
  const size_t max_m = std::min<size_t>(i, order_ - 1);
  const auto prefix = doc.first(i);
  for (size_t m = 0; m <= max_m; ++m) {
    const uint64_t ctx = PackContext(prefix, m);
    ++counts_[ctx | token];
    ++totals_[ctx];
  }
}

void NGramTrainer::AddDocument(std::span<const TokenId> doc) {
  for (size_t i = 0; i < doc.size(); ++i) CountPosition(doc, i);
}

std::shared_ptr<const NGramModel> NGramTrainer::Freeze() const {
  auto model = std::make_shared<NGramModel>(order_, alpha_);
  model->counts_ = SortedEntries(counts_);
  model->totals_ = SortedEntries(totals_);
  return model;
}

TokenSequence BytesToTokens(std::string_view text) {
  TokenSequence out;
  out.ids.reserve(text.size());
  for (char c : text) out.ids.push_back(static_cast<unsigned char>(c));
  return out;
}

std::vector<ProviderSnapshot> Train(std::span<const std::string> corpus,
                                    const TrainOptions& options) {
  if (corpus.empty()) throw InputError("training corpus is empty");
  if (options.epochs < 1) throw InputError("epochs must be at least 1");
  NGramTrainer trainer(options.order, options.alpha);
  std::vector<ProviderSnapshot> snapshots;
  uint64_t consumed = 0;
  std::vector<TokenId> doc;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(DeriveSeed(options.seed, static_cast<uint64_t>(epoch)));
    rng.Shuffle(std::span<size_t>(order));
    for (size_t index : order) {
      const std::string& text = corpus[index];
      doc.assign(text.begin(), text.end());
      for (auto& t : doc) t &= 0xFF;
      for (size_t i = 0; i < doc.size(); ++i) {
        trainer.CountPosition(doc, i);
        ++consumed;
        if (options.checkpoint_every > 0 &&
            consumed % options.checkpoint_every == 0) {
          snapshots.push_back({consumed, trainer.Freeze()});
        }
      }
    }
  }
  if (snapshots.empty() || snapshots.back().step != consumed) {
    snapshots.push_back({consumed, trainer.Freeze()});
  }
  return snapshots;
}

}  // namespace trapkit
