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

#include "trapkit/eval.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "trapkit/builtin_provider.h"
#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/toy_corpus.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

// Average over all member x non-member pairs.
double PairwiseAuc(const std::vector<double>& m, const std::vector<double>& n) {
  double total = 0.0;
  for (double a : m) {
    for (double b : n) total += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return total / (static_cast<double>(m.size()) * static_cast<double>(n.size()));
}

// Textbook single-pass formula.
double ClosedFormPearson(const std::vector<double>& x,
                         const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = x.size();
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) /
                             std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

std::vector<double> RandomScores(SplitMix64& rng, size_t n, int levels) {
  std::vector<double> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<double>(rng.UniformInt(levels)) / 7.0);
  }
  return out;
}

MembershipRecord Rec(bool member, double value, std::optional<int> bucket,
                     Method method = Method::kLoss) {
  MembershipRecord r;
  r.ref = (member ? "m" : "n") + std::to_string(value);
  r.member = member;
  r.bucket = bucket;
  r.AddScore({method, value, OrientationOf(method), {}});
  return r;
}

TEST(AucTest, PerfectSeparationAndTie) {
  EXPECT_EQ(Auc(std::vector<double>{3, 2}, std::vector<double>{1, 0},
                Orientation::kHigherIsMember),
            1.0);
  EXPECT_EQ(Auc(std::vector<double>{3, 2}, std::vector<double>{1, 0},
                Orientation::kLowerIsMember),
            0.0);
  EXPECT_EQ(Auc(std::vector<double>{1}, std::vector<double>{1},
                Orientation::kHigherIsMember),
            0.5);
}

TEST(AucTest, EmptySideIsInputError) {
  try {
    Auc({}, std::vector<double>{1}, Orientation::kHigherIsMember);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInput);
  }
  EXPECT_THROW(Auc(std::vector<double>{1}, {}, Orientation::kHigherIsMember),
               Error);
}

TEST(AucTest, MatchesPairwiseOracleExactly) {
  SplitMix64 rng(1);
  for (int c = 0; c < 50; ++c) {
    const auto m = RandomScores(rng, 1 + rng.UniformInt(200), 1 + c);
    const auto n = RandomScores(rng, 1 + rng.UniformInt(200), 1 + c);
    const double higher = Auc(m, n, Orientation::kHigherIsMember);
    EXPECT_EQ(higher, PairwiseAuc(m, n));
    EXPECT_EQ(Auc(m, n, Orientation::kLowerIsMember), 1.0 - higher);
  }
}

TEST(AucTest, SymmetryAndMonotoneInvariance) {
  SplitMix64 rng(2);
  std::vector<double> m, n;
  for (int i = 0; i < 100; ++i) m.push_back(rng.Uniform01() + 0.2);
  for (int i = 0; i < 80; ++i) n.push_back(rng.Uniform01());
  const double a = Auc(m, n, Orientation::kHigherIsMember);
  EXPECT_DOUBLE_EQ(a + Auc(n, m, Orientation::kHigherIsMember), 1.0);
  std::vector<double> mt, nt;
  for (double x : m) mt.push_back(std::exp(3 * x) - 5);
  for (double x : n) nt.push_back(std::exp(3 * x) - 5);
  EXPECT_EQ(Auc(mt, nt, Orientation::kHigherIsMember), a);
}

TEST(BucketedAucTest, SingleBucketEqualsGlobal) {
  std::vector<MembershipRecord> recs = {Rec(true, 1.0, 4), Rec(true, 3.0, 4),
                                        Rec(false, 2.0, 4), Rec(false, 5.0, 4)};
  auto buckets = BucketedAuc(recs, Method::kLoss);
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets[0].bucket, 4);
  std::vector<double> m, n;
  SplitScores(recs, Method::kLoss, m, n);
  EXPECT_EQ(*buckets[0].auc, Auc(m, n, Orientation::kLowerIsMember));
  EXPECT_EQ(buckets[0].n_members + buckets[0].n_nonmembers, 4u);
}

TEST(BucketedAucTest, OneSidedBucketIsUndefined) {
  std::vector<MembershipRecord> recs = {Rec(true, 1.0, 1), Rec(false, 2.0, 1),
                                        Rec(true, 3.0, 2), Rec(true, 4.0, 2)};
  auto buckets = BucketedAuc(recs, Method::kLoss);
  ASSERT_EQ(buckets.size(), 2u);
  EXPECT_TRUE(buckets[0].auc.has_value());
  EXPECT_FALSE(buckets[1].auc.has_value());
  EXPECT_EQ(buckets[1].n_members, 2u);
}

TEST(BucketedAucTest, MissingScoreIsInputError) {
  std::vector<MembershipRecord> recs = {Rec(true, 1.0, 1, Method::kMinK)};
  EXPECT_THROW(BucketedAuc(recs, Method::kLoss), Error);
}

TEST(PearsonTest, ExactLinear) {
  std::vector<double> xs, ys;
  for (int i = 1; i <= 10; ++i) {
    xs.push_back(i);
    ys.push_back(2.0 * i + 1.0);
  }
  auto res = PearsonPerm(xs, ys, 999, 3);
  EXPECT_NEAR(res.r, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(res.p_value, 1.0 / 1000.0);
  EXPECT_EQ(res.n_perm, 999);
}

TEST(PearsonTest, ConstantSeriesIsError) {
  std::vector<double> xs = {1, 2, 3}, ys = {4, 4, 4};
  try {
    PearsonR(xs, ys);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
  EXPECT_THROW(PearsonR(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
               Error);
}

TEST(PearsonTest, MatchesClosedFormAndIsAffineInvariant) {
  SplitMix64 rng(4);
  for (int c = 0; c < 100; ++c) {
    const size_t n = 3 + rng.UniformInt(50);
    std::vector<double> xs, ys, xa, ya;
    for (size_t i = 0; i < n; ++i) {
      xs.push_back(rng.Uniform01() * 10);
      ys.push_back(0.3 * xs.back() + rng.Uniform01() * 5);
      xa.push_back(2.5 * xs.back() - 7);
      ya.push_back(0.1 * ys.back() + 3);
    }
    const double r = PearsonR(xs, ys);
    EXPECT_NEAR(r, ClosedFormPearson(xs, ys), 1e-12);
    EXPECT_NEAR(PearsonR(xa, ya), r, 1e-12);
  }
}

TEST(PearsonTest, UncorrelatedDataIsNotSignificant) {
  SplitMix64 rng(5);
  std::vector<double> xs, ys;
  for (int i = 0; i < 40; ++i) {
    xs.push_back(rng.Uniform01());
    ys.push_back(rng.Uniform01());
  }
  auto res = PearsonPerm(xs, ys, 2000, 6);
  EXPECT_GT(res.p_value, 0.01);
  EXPECT_EQ(PearsonPerm(xs, ys, 2000, 6).p_value, res.p_value);
}

TEST(ThresholdTest, WidestGapMidpoint) {
  std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
  std::vector<bool> l = {true, true, false, false};
  EXPECT_DOUBLE_EQ(ThresholdMaxAccuracy(s, l, Orientation::kHigherIsMember), 0.5);
  std::vector<bool> flipped = {false, false, true, true};
  const double t = ThresholdMaxAccuracy(s, flipped, Orientation::kLowerIsMember);
  EXPECT_DOUBLE_EQ(t, 0.5);
  EXPECT_EQ(Accuracy(s, flipped, t, Orientation::kLowerIsMember), 1.0);
}

TEST(ThresholdTest, SingleMemberAboveNonMember) {
  std::vector<double> s = {2.0, 1.0};
  std::vector<bool> l = {true, false};
  const double t = ThresholdMaxAccuracy(s, l, Orientation::kHigherIsMember);
  EXPECT_GT(t, 1.0);
  EXPECT_LT(t, 2.0);
}

TEST(ThresholdTest, MatchesExhaustiveSweep) {
  SplitMix64 rng(7);
  for (int c = 0; c < 200; ++c) {
    const size_t n = 2 + rng.UniformInt(40);
    std::vector<double> s;
    std::vector<bool> l;
    for (size_t i = 0; i < n; ++i) {
      s.push_back(static_cast<double>(rng.UniformInt(15)));
      l.push_back(rng.UniformInt(2) == 1);
    }
    l[0] = true;
    l[1] = false;
    for (Orientation o : {Orientation::kHigherIsMember, Orientation::kLowerIsMember}) {
      double best = 0.0;
      std::vector<double> cands = {-100.0, 100.0};
      for (double a : s) {
        for (double b : s) cands.push_back((a + b) / 2.0);
      }
      for (double t : cands) best = std::max(best, Accuracy(s, l, t, o));
      const double t = ThresholdMaxAccuracy(s, l, o);
      EXPECT_EQ(Accuracy(s, l, t, o), best);
    }
  }
}

TEST(ThresholdTest, NeedsBothLabels) {
  std::vector<double> s = {1.0, 2.0};
  EXPECT_THROW(
      ThresholdMaxAccuracy(s, {true, true}, Orientation::kHigherIsMember), Error);
}

TEST(BootstrapTest, DeterministicAndBracketsEstimate) {
  SplitMix64 rng(8);
  std::vector<double> m, n;
  for (int i = 0; i < 100; ++i) m.push_back(rng.Uniform01() + 0.3);
  for (int i = 0; i < 100; ++i) n.push_back(rng.Uniform01());
  const double auc = Auc(m, n, Orientation::kHigherIsMember);
  auto a = BootstrapAuc(m, n, Orientation::kHigherIsMember, 1000, 9);
  auto b = BootstrapAuc(m, n, Orientation::kHigherIsMember, 1000, 9);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_LT(a.lower, auc);
  EXPECT_GT(a.upper, auc);
  EXPECT_GT(a.std_dev, 0.0);
  EXPECT_LT(a.std_dev, 0.1);
}

TEST(CheckpointCurveTest, UntrainedAndDuplicatedSnapshots) {
  ToyLexicon lex(10);
  auto docs = ToyDocuments(lex, 10, 300, 1);
  std::vector<std::string> members(docs.begin(), docs.begin() + 5);
  TrainOptions opts;
  opts.checkpoint_every = 2000;
  auto snaps = Train(members, opts);
  snaps.insert(snaps.begin(),
               ProviderSnapshot{0, std::make_shared<const NGramModel>(4, 0.5)});
  snaps.push_back(snaps.back());
  std::vector<std::string> m, n;
  SplitMix64 rng(2);
  for (int i = 0; i < 20; ++i) {
    m.push_back(members[i % 5].substr(100 + 7 * i, 40));
    n.push_back(docs[5 + i % 5].substr(100 + 7 * i, 40));
  }
  auto curve = CheckpointCurve(snaps, nullptr, m, n, Method::kLoss);
  ASSERT_EQ(curve.size(), snaps.size());
  EXPECT_EQ(curve.front().step, 0u);
  EXPECT_EQ(curve.front().auc, 0.5);
  EXPECT_EQ(curve[curve.size() - 1].auc, curve[curve.size() - 2].auc);
  EXPECT_GT(curve.back().auc, 0.8);
  EXPECT_THROW(CheckpointCurve({snaps[0]}, nullptr, m, n, Method::kLoss), Error);
  EXPECT_THROW(CheckpointCurve(snaps, nullptr, m, n, Method::kRatio), Error);
}

TEST(EvaluateTest, ReportAndCsv) {
  std::vector<MembershipRecord> recs;
  SplitMix64 rng(11);
  for (int b = 1; b <= 5; ++b) {
    for (int i = 0; i < 10; ++i) {
      recs.push_back(Rec(true, rng.Uniform01() - 0.05 * b, b));
      recs.push_back(Rec(false, rng.Uniform01(), b));
    }
  }
  EvalOptions opts;
  opts.n_perm = 200;
  opts.bootstrap = 100;
  auto report = Evaluate(recs, Method::kLoss, opts);
  EXPECT_EQ(report.n_members, 50u);
  EXPECT_EQ(report.n_nonmembers, 50u);
  ASSERT_EQ(report.per_bucket.size(), 5u);
  ASSERT_TRUE(report.pearson.has_value());
  auto j = ToJson(report);
  EXPECT_EQ(j["method"], "loss");
  EXPECT_EQ(j["orientation"], "lower_is_member");
  EXPECT_EQ(j["per_bucket"].size(), 5u);
  size_t total = 0;
  for (const auto& b : report.per_bucket) total += b.n_members + b.n_nonmembers;
  EXPECT_EQ(total, recs.size());

  const auto dir = std::filesystem::temp_directory_path() / "trapkit_eval_test";
  WriteBucketCsv(dir / "b.csv", {{1, 0.75, 2, 2}, {2, std::nullopt, 1, 0}});
  EXPECT_EQ(ReadFile(dir / "b.csv"),
            "bucket,auc,n_members,n_nonmembers\n1,0.75,2,2\n2,,1,0\n");
  WriteCheckpointCsv(dir / "c.csv", {{0, 0.5}, {10, 0.625}});
  EXPECT_EQ(ReadFile(dir / "c.csv"), "step,auc\n0,0.5\n10,0.625\n");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace trapkit
