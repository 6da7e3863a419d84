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

#include "trapkit/trap_gen.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "trapkit/builtin_provider.h"
#include "trapkit/error.h"
#include "trapkit/ngram_model.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

// Scores every token at a fixed perplexity; samples lowercase letters.
class FixedPerplexityProvider final : public Provider {
 public:
  explicit FixedPerplexityProvider(double perplexity)
      : logprob_(-std::log(perplexity)) {}
  const std::string& id() const override { return id_; }
  TokenSequence Tokenize(std::string_view text) const override {
    TokenSequence out{{}, id_};
    for (unsigned char c : text) out.ids.push_back(c);
    return out;
  }
  TokenScores Score(const TokenSequence& tokens,
                    const TokenSequence& context) const override {
    return {std::vector<double>(tokens.size(), logprob_), context.size()};
  }
  Generation Sample(const TokenSequence&,
                    const SamplingParams& params) const override {
    SplitMix64 rng(params.seed);
    Generation g;
    g.tokens.provider_id = id_;
    for (size_t i = 0; i < params.max_new; ++i) {
      const char c = static_cast<char>('a' + rng.UniformInt(26));
      g.tokens.ids.push_back(static_cast<unsigned char>(c));
      g.text.push_back(c);
    }
    return g;
  }
  std::optional<std::string> Detokenize(
      const TokenSequence& tokens) const override {
    return std::string(tokens.ids.begin(), tokens.ids.end());
  }

 private:
  double logprob_;
  std::string id_ = "fixed";
};

// Wraps FixedPerplexityProvider without local detokenization.
class OpaqueProvider final : public Provider {
 public:
  const std::string& id() const override { return inner_.id(); }
  TokenSequence Tokenize(std::string_view text) const override {
    return inner_.Tokenize(text);
  }
  TokenScores Score(const TokenSequence& t,
                    const TokenSequence& c) const override {
    return inner_.Score(t, c);
  }
  Generation Sample(const TokenSequence& p,
                    const SamplingParams& s) const override {
    return inner_.Sample(p, s);
  }

 private:
  FixedPerplexityProvider inner_{5.0};
};

std::unique_ptr<BuiltinProvider> TrainedProvider() {
  std::vector<std::string> docs;
  SplitMix64 rng(7);
  const char* words[] = {"the", "cat", "sat", "on", "a", "mat", "and",
                         "dog", "ran", "far", "away", "from", "home"};
  for (int d = 0; d < 20; ++d) {
    std::string doc;
    for (int w = 0; w < 200; ++w) {
      doc += words[rng.UniformInt(13)];
      doc.push_back(' ');
    }
    docs.push_back(doc);
  }
  TrainOptions opts;
  opts.order = 3;
  auto snaps = Train(docs, opts);
  return std::make_unique<BuiltinProvider>(snaps.back().model);
}

TEST(BucketOfTest, Edges) {
  EXPECT_EQ(BucketOf(1.0), 1);
  EXPECT_EQ(BucketOf(10.999999), 1);
  EXPECT_EQ(BucketOf(11.0), 2);
  EXPECT_EQ(BucketOf(41.0), 5);
  EXPECT_EQ(BucketOf(50.999), 5);
  EXPECT_EQ(BucketOf(100.999999), 10);
  EXPECT_EQ(BucketOf(101.0), std::nullopt);
  EXPECT_EQ(BucketOf(1e9), std::nullopt);
}

TEST(BucketOfTest, MatchesLinearScan) {
  const BucketSpec spec;
  for (int step = 0; step <= 12000; ++step) {
    const double p = 1.0 + step * 0.01;
    std::optional<int> expected;
    for (int i = 1; i <= spec.count; ++i) {
      if (1.0 + (i - 1) * 10.0 <= p && p < 1.0 + i * 10.0) expected = i;
    }
    ASSERT_EQ(BucketOf(p), expected) << p;
  }
}

TEST(BucketOfTest, RejectsImpossibleValues) {
  EXPECT_THROW(BucketOf(0.999), Error);
  EXPECT_THROW(BucketOf(std::nan("")), Error);
}

TEST(DefaultTemperaturesTest, HalfToEight) {
  auto t = DefaultTemperatures();
  ASSERT_EQ(t.size(), 16u);
  EXPECT_DOUBLE_EQ(t.front(), 0.5);
  EXPECT_DOUBLE_EQ(t.back(), 8.0);
}

SyntheticOptions SmallOptions(uint64_t seed) {
  SyntheticOptions o;
  o.target_len = 12;
  o.quota_per_bucket = 3;
  o.seed = seed;
  o.max_attempts = 4000;
  return o;
}

TEST(GenerateSyntheticTest, InvariantsHold) {
  auto ref = TrainedProvider();
  auto report = GenerateSynthetic(*ref, SmallOptions(1));
  ASSERT_FALSE(report.traps.empty());
  std::vector<int> counts(10, 0);
  std::set<std::string> ids;
  for (const auto& t : report.traps) {
    EXPECT_EQ(t.length(), 12u);
    EXPECT_EQ(t.text.size(), 12u);
    ASSERT_TRUE(t.bucket.has_value());
    EXPECT_EQ(BucketOf(t.perplexity), t.bucket);
    EXPECT_NEAR(t.perplexity,
                std::exp(SequenceLoss(*ref, ref->Tokenize(t.text))), 1e-9);
    EXPECT_FALSE(t.member);
    EXPECT_EQ(t.kind, TrapKind::kSynthetic);
    EXPECT_TRUE(t.temperature.has_value());
    ++counts[*t.bucket - 1];
    EXPECT_TRUE(ids.insert(t.id).second);
  }
  for (int b = 0; b < 10; ++b) {
    EXPECT_LE(counts[b], 3);
    EXPECT_EQ(counts[b], report.per_bucket[b]);
    EXPECT_EQ(report.shortfall[b], 3 - counts[b]);
  }
  EXPECT_GT(*std::max_element(counts.begin(), counts.end()), 0);
}

TEST(GenerateSyntheticTest, DeterministicAndWorkerIndependent) {
  auto ref = TrainedProvider();
  auto a = GenerateSynthetic(*ref, SmallOptions(5));
  auto opts = SmallOptions(5);
  opts.workers = 4;
  auto b = GenerateSynthetic(*ref, opts);
  ASSERT_EQ(a.traps.size(), b.traps.size());
  for (size_t i = 0; i < a.traps.size(); ++i) {
    EXPECT_EQ(ToJson(a.traps[i]), ToJson(b.traps[i]));
  }
  EXPECT_EQ(a.attempts, b.attempts);
}

TEST(GenerateSyntheticTest, DifferentSeedsGiveDisjointIds) {
  auto ref = TrainedProvider();
  auto a = GenerateSynthetic(*ref, SmallOptions(1));
  auto b = GenerateSynthetic(*ref, SmallOptions(2));
  std::set<std::string> ids_a, texts_a;
  for (const auto& t : a.traps) ids_a.insert(t.id), texts_a.insert(t.text);
  size_t same_text = 0;
  for (const auto& t : b.traps) {
    EXPECT_EQ(ids_a.count(t.id), 0u);
    same_text += texts_a.count(t.text);
  }
  EXPECT_LT(same_text, b.traps.size());
}

TEST(GenerateSyntheticTest, FullQuotaAndShortfall) {
  FixedPerplexityProvider ref(5.0);  // every candidate lands in bucket 1
  SyntheticOptions o;
  o.target_len = 4;
  o.quota_per_bucket = 1;
  o.max_attempts = 50;
  auto report = GenerateSynthetic(ref, o);
  ASSERT_EQ(report.traps.size(), 1u);
  EXPECT_EQ(report.traps[0].bucket, 1);
  EXPECT_EQ(report.attempts, 50u);
  EXPECT_EQ(report.bucket_full, 49u);
  EXPECT_FALSE(report.complete());
  EXPECT_EQ(report.total_shortfall(), 9);
  EXPECT_EQ(report.shortfall[0], 0);
  for (int b = 1; b < 10; ++b) EXPECT_EQ(report.shortfall[b], 1);
}

TEST(GenerateSyntheticTest, StopsWhenComplete) {
  FixedPerplexityProvider ref(5.0);
  SyntheticOptions o;
  o.target_len = 4;
  o.quota_per_bucket = 7;
  o.spec.count = 1;
  auto report = GenerateSynthetic(ref, o);
  EXPECT_TRUE(report.complete());
  EXPECT_EQ(report.traps.size(), 7u);
  EXPECT_EQ(report.attempts, 7u);
}

TEST(GenerateSyntheticTest, OutOfRangeCounted) {
  auto ref = BuiltinProvider::Uniform();  // perplexity 256 everywhere
  SyntheticOptions o;
  o.target_len = 5;
  o.quota_per_bucket = 1;
  o.max_attempts = 20;
  auto report = GenerateSynthetic(*ref, o);
  EXPECT_TRUE(report.traps.empty());
  EXPECT_EQ(report.out_of_range + report.rejected, 20u);
}

TEST(GenerateSyntheticTest, RejectsBadOptions) {
  FixedPerplexityProvider ref(5.0);
  SyntheticOptions o;
  o.target_len = 0;
  EXPECT_THROW(GenerateSynthetic(ref, o), Error);
  o = {};
  o.quota_per_bucket = 0;
  EXPECT_THROW(GenerateSynthetic(ref, o), Error);
  o = {};
  o.temperatures.clear();
  EXPECT_THROW(GenerateSynthetic(ref, o), Error);
}

TEST(SampleRealTest, ShortDocumentIsInputError) {
  FixedPerplexityProvider ref(5.0);
  RealOptions o;
  o.target_len = 10;
  try {
    SampleReal("d", "too short", ref, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInput);
  }
}

TEST(SampleRealTest, ExactLengthDocumentIsSingleWindow) {
  FixedPerplexityProvider ref(5.0);
  RealOptions o;
  o.target_len = 9;
  o.quota_per_bucket = 5;
  auto report = SampleReal("doc1", "abcdefghi", ref, o);
  ASSERT_EQ(report.traps.size(), 1u);
  EXPECT_EQ(report.traps[0].text, "abcdefghi");
  EXPECT_EQ(report.traps[0].source_doc, "doc1");
  EXPECT_EQ(report.traps[0].kind, TrapKind::kReal);
  EXPECT_EQ(report.attempts, 1u);
}

TEST(SampleRealTest, WindowsAreSubstringsAndDistinct) {
  FixedPerplexityProvider ref(5.0);
  const std::string doc = "the quick brown fox jumps over the lazy dog";
  RealOptions o;
  o.target_len = 6;
  o.quota_per_bucket = 10;
  o.seed = 3;
  auto report = SampleReal("d", doc, ref, o);
  ASSERT_EQ(report.traps.size(), 10u);
  std::set<std::string> ids;
  for (const auto& t : report.traps) {
    EXPECT_EQ(t.length(), 6u);
    EXPECT_NE(doc.find(t.text), std::string::npos);
    EXPECT_TRUE(ids.insert(t.id).second);
  }
  auto again = SampleReal("d", doc, ref, o);
  for (size_t i = 0; i < report.traps.size(); ++i) {
    EXPECT_EQ(report.traps[i].id, again.traps[i].id);
  }
}

TEST(SampleRealTest, NeedsDetokenize) {
  OpaqueProvider ref;
  try {
    SampleReal("d", "abcdefghij", ref, RealOptions{.target_len = 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapability);
  }
}

TEST(MatchStratificationTest, TrimsToPerBucketMinimum) {
  auto make = [](std::vector<int> buckets) {
    std::vector<TrapSequence> v;
    for (size_t i = 0; i < buckets.size(); ++i) {
      TrapSequence t;
      t.id = std::to_string(i);
      t.bucket = buckets[i];
      v.push_back(t);
    }
    return v;
  };
  auto a = make({1, 1, 1, 2, 3});
  auto b = make({1, 2, 2, 2, 4});
  MatchStratification(a, b);
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(a[0].id, "0");
  EXPECT_EQ(a[1].id, "3");
  EXPECT_EQ(b[0].id, "0");
  EXPECT_EQ(b[1].id, "1");
}

TEST(TrapSetIoTest, RoundTrip) {
  auto ref = TrainedProvider();
  auto report = GenerateSynthetic(*ref, SmallOptions(9));
  const auto path =
      std::filesystem::temp_directory_path() / "trapkit_trapset_test.jsonl";
  WriteTrapSet(path, report.traps, {{"seed", 9}});
  auto set = ReadTrapSet(path);
  EXPECT_EQ(set.config["seed"], 9);
  ASSERT_EQ(set.traps.size(), report.traps.size());
  for (size_t i = 0; i < set.traps.size(); ++i) {
    EXPECT_EQ(ToJson(set.traps[i]), ToJson(report.traps[i]));
    EXPECT_EQ(set.traps[i].perplexity, report.traps[i].perplexity);
  }
  std::filesystem::remove(path);
}

TEST(TrapSetIoTest, RejectsMissingHeader) {
  const auto path =
      std::filesystem::temp_directory_path() / "trapkit_trapset_bad.jsonl";
  WriteFile(path, "{\"id\":\"x\"}\n");
  EXPECT_THROW(ReadTrapSet(path), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace trapkit
