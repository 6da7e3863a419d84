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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"
#include "trapkit/error.h"
#include "trapkit/rng.h"

namespace trapkit {
namespace {

std::vector<TokenId> Ids(const std::string& s) { return BytesToTokens(s).ids; }

std::string RandomText(SplitMix64& rng, size_t n, const std::string& alphabet) {
  std::string out;
  for (size_t i = 0; i < n; ++i) out.push_back(alphabet[rng.UniformInt(alphabet.size())]);
  return out;
}

TEST(NGramModelTest, UntrainedIsExactlyUniform) {
  NGramModel model(4, 0.5);
  EXPECT_EQ(model.ConditionalProb(Ids(""), 'x'), 1.0 / 256);
  EXPECT_EQ(model.ConditionalProb(Ids("abc"), 0), 1.0 / 256);
  EXPECT_EQ(model.ConditionalProb(Ids("zzzzzz"), 255), 1.0 / 256);
}

TEST(NGramModelTest, BigramOnAaaaMatchesHandEvaluation) {
  // P_uni(a) = (4 + 1/256) / 5 = 0.80078125
  // P(a|a)   = (3 + 0.80078125) / 4 = 0.9501953125
  const std::vector<std::string> corpus = {"aaaa"};
  auto snapshots = Train(corpus, {.order = 2, .alpha = 1.0});
  ASSERT_EQ(snapshots.size(), 1u);
  const NGramModel& model = *snapshots.back().model;
  EXPECT_EQ(model.Count(Ids("a"), 'a'), 3u);
  EXPECT_EQ(model.Total(Ids("")), 4u);
  EXPECT_NEAR(model.ConditionalProb(Ids(""), 'a'), 0.80078125, 1e-9);
  EXPECT_NEAR(model.ConditionalProb(Ids("a"), 'a'), 0.9501953125, 1e-9);
  // Only the last order-1 tokens matter.
  EXPECT_EQ(model.ConditionalProb(Ids("bba"), 'a'),
            model.ConditionalProb(Ids("a"), 'a'));
}

TEST(NGramModelTest, ConditionalsSumToOne) {
  SplitMix64 rng(7);
  std::vector<std::string> corpus;
  for (int i = 0; i < 20; ++i) corpus.push_back(RandomText(rng, 400, "abcde fgh"));
  auto model = Train(corpus, {.order = 4, .alpha = 0.5}).back().model;
  std::vector<double> logprobs(256);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::string ctx = RandomText(rng, rng.UniformInt(6), "abcdefghxyz ");
    double sum = 0.0;
    for (TokenId t = 0; t < 256; ++t) sum += model->ConditionalProb(Ids(ctx), t);
    ASSERT_NEAR(sum, 1.0, 1e-9) << "context '" << ctx << "'";
    model->NextTokenLogProbs(Ids(ctx), logprobs);
    for (TokenId t = 0; t < 256; ++t) {
      ASSERT_NEAR(std::exp(logprobs[t]), model->ConditionalProb(Ids(ctx), t),
                  1e-15);
    }
  }
}

TEST(NGramModelTest, MatchesIndependentOracle) {
  SplitMix64 rng(11);
  std::vector<std::string> corpus;
  testing::NGramOracle oracle(3, 0.7);
  for (int i = 0; i < 5; ++i) {
    corpus.push_back(RandomText(rng, 200, "abcd "));
    oracle.Add(corpus.back());
  }
  auto model = Train(corpus, {.order = 3, .alpha = 0.7}).back().model;
  for (int trial = 0; trial < 200; ++trial) {
    const std::string ctx = RandomText(rng, rng.UniformInt(5), "abcdz ");
    const auto token = static_cast<unsigned char>("abcdz "[rng.UniformInt(6)]);
    ASSERT_NEAR(model->ConditionalProb(Ids(ctx), token),
                oracle.Prob(ctx, token), 1e-12);
  }
}

TEST(NGramModelTest, CheckpointArithmetic) {
  const std::vector<std::string> corpus = {"abcde", "fghij"};
  auto snapshots = Train(corpus, {.order = 2, .checkpoint_every = 5});
  // 5 and 10; the final snapshot coincides with the second checkpoint.
  ASSERT_EQ(snapshots.size(), 2u);
  EXPECT_EQ(snapshots[0].step, 5u);
  EXPECT_EQ(snapshots[1].step, 10u);

  snapshots = Train(corpus, {.order = 2, .checkpoint_every = 3});
  std::vector<uint64_t> steps;
  for (const auto& s : snapshots) steps.push_back(s.step);
  EXPECT_EQ(steps, (std::vector<uint64_t>{3, 6, 9, 10}));
}

TEST(NGramModelTest, CountingIsAdditive) {
  const std::string doc = "the cat sat on the mat";
  const std::vector<std::string> once = {doc};
  const std::vector<std::string> twice = {doc, doc};
  auto a = Train(twice, {.order = 3}).back().model;
  auto b = Train(once, {.order = 3, .epochs = 2}).back().model;
  auto single = Train(once, {.order = 3}).back().model;
  EXPECT_TRUE(*a == *b);
  EXPECT_EQ(a->Count(Ids("th"), 'e'), 2 * single->Count(Ids("th"), 'e'));
  EXPECT_EQ(a->Total(Ids("")), 2 * single->Total(Ids("")));
}

TEST(NGramModelTest, DocumentsDoNotBridge) {
  const std::vector<std::string> corpus = {"ab", "cd"};
  auto model = Train(corpus, {.order = 2, .seed = 3}).back().model;
  EXPECT_EQ(model->Count(Ids("b"), 'c'), 0u);
  EXPECT_EQ(model->Count(Ids("d"), 'a'), 0u);
  EXPECT_EQ(model->Count(Ids("a"), 'b'), 1u);
}

TEST(NGramModelTest, SnapshotsAreIsolated) {
  SplitMix64 rng(5);
  std::vector<std::string> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(RandomText(rng, 100, "xyz "));
  auto snapshots = Train(corpus, {.order = 3, .checkpoint_every = 250});
  ASSERT_GE(snapshots.size(), 3u);
  const double early = snapshots[0].model->ConditionalProb(Ids("xy"), 'z');
  // Re-training the same corpus further must not touch the earlier model.
  auto again = Train(corpus, {.order = 3, .checkpoint_every = 250});
  EXPECT_EQ(snapshots[0].model->ConditionalProb(Ids("xy"), 'z'), early);
  EXPECT_TRUE(*again[0].model == *snapshots[0].model);
  EXPECT_LT(snapshots[0].model->Total(Ids("")),
            snapshots.back().model->Total(Ids("")));
  for (size_t i = 1; i < snapshots.size(); ++i) {
    EXPECT_GT(snapshots[i].step, snapshots[i - 1].step);
  }
}

TEST(NGramModelTest, SaveLoadRoundTripIsBitExact) {
  SplitMix64 rng(9);
  std::vector<std::string> corpus;
  for (int i = 0; i < 8; ++i) corpus.push_back(RandomText(rng, 300, "qwerty "));
  auto model = Train(corpus, {.order = 4, .alpha = 0.3}).back().model;
  const auto path =
      std::filesystem::temp_directory_path() / "trapkit_ngram_roundtrip.bin";
  model->Save(path, 2400);
  auto [loaded, step] = NGramModel::Load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(step, 2400u);
  EXPECT_TRUE(*loaded == *model);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string ctx = RandomText(rng, 3, "qwerty ");
    const TokenId t = static_cast<unsigned char>("qwerty "[rng.UniformInt(7)]);
    EXPECT_EQ(loaded->ConditionalProb(Ids(ctx), t),
              model->ConditionalProb(Ids(ctx), t));
  }
}

TEST(NGramModelTest, LoadRejectsGarbage) {
  const auto path =
      std::filesystem::temp_directory_path() / "trapkit_ngram_garbage.bin";
  {
    std::ofstream out(path);
    out << "not a model";
  }
  EXPECT_THROW(NGramModel::Load(path), Error);
  std::filesystem::remove(path);
}

TEST(NGramModelTest, RejectsBadArguments) {
  EXPECT_THROW(NGramModel(0, 0.5), Error);
  EXPECT_THROW(NGramModel(8, 0.5), Error);
  EXPECT_THROW(NGramModel(3, 0.0), Error);
  const std::vector<std::string> empty;
  EXPECT_THROW(Train(empty, {}), Error);
  NGramModel model(2, 1.0);
  EXPECT_THROW(model.ConditionalProb(Ids("a"), 256), Error);
}

}  // namespace
}  // namespace trapkit
