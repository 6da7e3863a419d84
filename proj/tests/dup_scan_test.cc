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

#include "trapkit/dup_scan.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "trapkit/builtin_provider.h"
#include "trapkit/error.h"
#include "trapkit/ngram_model.h"
#include "trapkit/rng.h"
#include "trapkit/toy_corpus.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

using Counts = std::map<std::vector<TokenId>, uint64_t>;

Counts NaiveCounts(const std::vector<TokenizedDoc>& corpus, size_t w,
                   uint64_t min_count) {
  Counts all;
  for (const auto& d : corpus) {
    for (size_t i = 0; i + w <= d.ids.size(); ++i) {
      ++all[std::vector<TokenId>(d.ids.begin() + i, d.ids.begin() + i + w)];
    }
  }
  Counts out;
  for (const auto& [k, v] : all) {
    if (v >= min_count) out[k] = v;
  }
  return out;
}

Counts AsCounts(const std::vector<DuplicateWindow>& dups) {
  Counts out;
  for (const auto& d : dups) out[d.ids] = d.count;
  return out;
}

TEST(FindDuplicatesTest, HandExample) {
  // a b c a b c a b
  std::vector<TokenizedDoc> corpus = {{"d", {0, 1, 2, 0, 1, 2, 0, 1}}};
  auto dups = FindDuplicates(corpus, 2, 2);
  ASSERT_EQ(dups.size(), 3u);
  EXPECT_EQ(dups[0].ids, (std::vector<TokenId>{0, 1}));
  EXPECT_EQ(dups[0].count, 3u);
  EXPECT_EQ(AsCounts(dups),
            (Counts{{{0, 1}, 3}, {{1, 2}, 2}, {{2, 0}, 2}}));
  ASSERT_EQ(dups[0].example_locations.size(), 3u);
  EXPECT_EQ(dups[0].example_locations[1].offset, 3u);
}

TEST(FindDuplicatesTest, OverlappingOccurrencesCount) {
  std::vector<TokenizedDoc> corpus = {{"d", {7, 7, 7, 7, 7}}};
  auto dups = FindDuplicates(corpus, 2, 1);
  ASSERT_EQ(dups.size(), 1u);
  EXPECT_EQ(dups[0].count, 4u);
}

TEST(FindDuplicatesTest, WindowsNeverSpanDocuments) {
  std::vector<TokenizedDoc> corpus = {{"a", {1, 2}}, {"b", {3, 1, 2}}, {"c", {2, 3}}};
  auto dups = FindDuplicates(corpus, 2, 2);
  EXPECT_EQ(AsCounts(dups), (Counts{{{1, 2}, 2}}));
}

TEST(FindDuplicatesTest, WindowLongerThanEveryDocument) {
  std::vector<TokenizedDoc> corpus = {{"a", {1, 2, 3}}, {"b", {1, 2}}};
  EXPECT_TRUE(FindDuplicates(corpus, 4, 1).empty());
  EXPECT_THROW(FindDuplicates(corpus, 0, 1), Error);
  EXPECT_THROW(FindDuplicates(corpus, 2, 0), Error);
}

TEST(FindDuplicatesTest, MatchesNaiveScan) {
  SplitMix64 rng(1);
  for (int c = 0; c < 20; ++c) {
    std::vector<TokenizedDoc> corpus;
    const size_t docs = 1 + rng.UniformInt(10);
    const uint64_t vocab = 2 + rng.UniformInt(6);
    for (size_t d = 0; d < docs; ++d) {
      TokenizedDoc doc{"d" + std::to_string(d), {}};
      const size_t len = rng.UniformInt(3000);
      for (size_t i = 0; i < len; ++i) {
        doc.ids.push_back(static_cast<TokenId>(rng.UniformInt(vocab)));
      }
      corpus.push_back(std::move(doc));
    }
    const size_t w = 1 + rng.UniformInt(8);
    const uint64_t min_count = 1 + rng.UniformInt(5);
    auto dups = FindDuplicates(corpus, w, min_count, 1 + c % 3);
    EXPECT_EQ(AsCounts(dups), NaiveCounts(corpus, w, min_count));
    for (size_t i = 1; i < dups.size(); ++i) {
      EXPECT_GE(dups[i - 1].count, dups[i].count);
    }
  }
}

TEST(FindDuplicatesTest, PlantedWindowRecovered) {
  SplitMix64 rng(2);
  const std::vector<TokenId> planted = {11, 22, 33, 44, 55, 66, 77, 88, 99, 10};
  std::vector<TokenizedDoc> corpus;
  int placed = 0;
  for (int d = 0; d < 10; ++d) {
    TokenizedDoc doc{"d" + std::to_string(d), {}};
    for (int block = 0; block < 40; ++block) {
      for (int i = 0; i < 50; ++i) {
        doc.ids.push_back(static_cast<TokenId>(1000 + rng.UniformInt(1000000)));
      }
      if (placed < 37 && rng.UniformInt(3) == 0) {
        doc.ids.insert(doc.ids.end(), planted.begin(), planted.end());
        ++placed;
      }
    }
    corpus.push_back(std::move(doc));
  }
  ASSERT_EQ(placed, 37);
  auto dups = FindDuplicates(corpus, planted.size(), 2);
  ASSERT_EQ(dups.size(), 1u);
  EXPECT_EQ(dups[0].ids, planted);
  EXPECT_EQ(dups[0].count, 37u);
  EXPECT_EQ(dups[0].example_locations.size(), kMaxExampleLocations);
}

TEST(RepetitionBinsTest, DefaultsCoverSixTo1024) {
  auto bins = DefaultRepetitionBins();
  ASSERT_FALSE(bins.empty());
  EXPECT_EQ(bins.front().low, 6u);
  EXPECT_EQ(bins.back().high, 1025u);
  for (size_t i = 1; i < bins.size(); ++i) {
    EXPECT_EQ(bins[i].low, bins[i - 1].high);
  }
}

TEST(PerplexityByRepetitionTest, SingleDuplicateAndEmptyBins) {
  auto scorer = BuiltinProvider::Uniform();
  DuplicateWindow d{{104, 105}, 10, {}};
  auto stats = PerplexityByRepetition({d}, *scorer, DefaultRepetitionBins(), 100, 1);
  ASSERT_EQ(stats.size(), DefaultRepetitionBins().size());
  EXPECT_EQ(stats[1].n, 1u);
  EXPECT_NEAR(*stats[1].median_perplexity, 256.0, 1e-9);
  EXPECT_EQ(stats[0].n, 0u);
  EXPECT_FALSE(stats[0].median_perplexity.has_value());
  EXPECT_THROW(PerplexityByRepetition({d}, *scorer, {{1, 10}, {5, 20}}, 10, 1),
               Error);
}

TEST(PerplexityByRepetitionTest, SamplesAtMostPerBinAndIsDeterministic) {
  auto scorer = BuiltinProvider::Uniform();
  std::vector<DuplicateWindow> dups;
  for (TokenId i = 0; i < 50; ++i) dups.push_back({{i, i}, 7, {}});
  auto a = PerplexityByRepetition(dups, *scorer, {{6, 8}}, 20, 3);
  EXPECT_EQ(a[0].n, 20u);
  EXPECT_EQ(a[0].available, 50u);
  auto b = PerplexityByRepetition(dups, *scorer, {{6, 8}}, 20, 3);
  EXPECT_EQ(a[0].median_perplexity, b[0].median_perplexity);
}

TEST(PerplexityByRepetitionTest, LowPerplexityDuplicatedMoreOften) {
  ToyLexicon lex(4);
  TrainOptions opts;
  auto model = Train(ToyDocuments(lex, 20, 400, 1), opts).back().model;
  BuiltinProvider scorer(model);
  // Candidate windows: toy text (low perplexity) and random bytes (high).
  SplitMix64 rng(5);
  std::vector<std::pair<double, std::vector<TokenId>>> windows;
  for (int i = 0; i < 160; ++i) {
    std::string text = lex.Document(rng, 10).substr(0, 24);
    if (i % 2 == 1) {
      for (size_t j = 0; j < text.size(); j += 1 + (i % 7)) {
        text[j] = static_cast<char>('a' + rng.UniformInt(26));
      }
    }
    auto ids = scorer.Tokenize(text);
    windows.emplace_back(std::exp(SequenceLoss(scorer, ids)), ids.ids);
  }
  std::sort(windows.begin(), windows.end());
  // Rank r (0 = lowest perplexity) gets a count that shrinks with r.
  const std::vector<uint64_t> counts = {600, 300, 150, 70, 40, 20, 12, 7};
  std::vector<TokenizedDoc> corpus;
  for (size_t r = 0; r < windows.size(); ++r) {
    TokenizedDoc doc{"w" + std::to_string(r), {}};
    for (uint64_t c = 0; c < counts[r / 20]; ++c) {
      doc.ids.insert(doc.ids.end(), windows[r].second.begin(),
                     windows[r].second.end());
      doc.ids.push_back(1000 + static_cast<TokenId>(rng.UniformInt(1 << 20)));
    }
    corpus.push_back(std::move(doc));
  }
  auto dups = FindDuplicates(corpus, 24, 6);
  auto stats = PerplexityByRepetition(dups, scorer, DefaultRepetitionBins(), 100, 6);
  std::vector<double> medians;
  for (const auto& s : stats) {
    if (s.median_perplexity) medians.push_back(*s.median_perplexity);
  }
  ASSERT_GE(medians.size(), 5u);
  for (size_t i = 1; i < medians.size(); ++i) EXPECT_LT(medians[i], medians[i - 1]);
}

TEST(DupScanIoTest, JsonlAndCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "trapkit_dup_test";
  WriteDuplicates(dir / "d.jsonl", {{{1, 2}, 3, {{"a", 0}}}});
  EXPECT_EQ(ReadFile(dir / "d.jsonl"),
            "{\"count\":3,\"example_locations\":[{\"doc_id\":\"a\",\"offset\":0}],"
            "\"ids\":[1,2]}\n");
  WriteBinCsv(dir / "b.csv", {{{6, 8}, 12.5, 3, 3}, {{8, 16}, std::nullopt, 0, 0}});
  EXPECT_EQ(ReadFile(dir / "b.csv"),
            "bin_low,bin_high,median_ppl,n\n6,8,12.5,3\n8,16,,0\n");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace trapkit
