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

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "trapkit/builtin_provider.h"
#include "trapkit/error.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

namespace {

// Tie-aware count of member wins, doubled so it stays integral.
uint64_t DoubledWins(std::span<const double> members,
                     std::span<const double> nonmembers) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(members.size() + nonmembers.size());
  for (double s : members) all.emplace_back(s, true);
  for (double s : nonmembers) all.emplace_back(s, false);
  for (const auto& [s, m] : all) {
    if (std::isnan(s)) throw InputError("AUC input contains NaN");
  }
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  uint64_t wins2 = 0;
  uint64_t nonmembers_below = 0;
  for (size_t i = 0; i < all.size();) {
    size_t j = i;
    uint64_t gm = 0, gn = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? gm : gn) += 1;
      ++j;
    }
    wins2 += gm * (2 * nonmembers_below + gn);
    nonmembers_below += gn;
    i = j;
  }
  return wins2;
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

json ToJson(const ConfidenceInterval& ci) {
  return json{{"lower", ci.lower},
              {"upper", ci.upper},
              {"std_dev", ci.std_dev},
              {"resamples", ci.resamples}};
}

}  // namespace

double Auc(std::span<const double> members, std::span<const double> nonmembers,
           Orientation orientation) {
  if (members.empty() || nonmembers.empty()) {
    throw InputError("AUC needs at least one member and one non-member");
  }
  const double pairs2 = 2.0 * static_cast<double>(members.size()) *
                        static_cast<double>(nonmembers.size());
  const double higher =
      static_cast<double>(DoubledWins(members, nonmembers)) / pairs2;
  return orientation == Orientation::kHigherIsMember ? higher : 1.0 - higher;
}

void SplitScores(const std::vector<MembershipRecord>& records, Method method,
                 std::vector<double>& members, std::vector<double>& nonmembers) {
  members.clear();
  nonmembers.clear();
  for (const auto& r : records) {
    const AttackScore* s = r.Find(method);
    if (!s) {
      throw InputError("record '" + r.ref + "' has no " + MethodName(method) +
                       " score");
    }
    (r.member ? members : nonmembers).push_back(s->value);
  }
}

std::vector<BucketAuc> BucketedAuc(const std::vector<MembershipRecord>& records,
                                   Method method) {
  std::map<int, std::vector<MembershipRecord>> by_bucket;
  for (const auto& r : records) {
    if (r.bucket) by_bucket[*r.bucket].push_back(r);
  }
  std::vector<BucketAuc> out;
  for (const auto& [bucket, group] : by_bucket) {
    std::vector<double> m, n;
    SplitScores(group, method, m, n);
    BucketAuc entry{bucket, std::nullopt, m.size(), n.size()};
    if (!m.empty() && !n.empty()) entry.auc = Auc(m, n, OrientationOf(method));
    out.push_back(entry);
  }
  return out;
}

double PearsonR(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InputError("series lengths differ");
  if (xs.size() < 3) throw InputError("correlation needs at least 3 points");
  const long double n = static_cast<long double>(xs.size());
  long double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const long double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) {
    throw Error(ErrorCode::kDegenerate,
                "correlation is undefined for a constant series");
  }
  const long double r = sxy / std::sqrt(sxx * syy);
  return static_cast<double>(std::clamp(r, -1.0L, 1.0L));
}

PearsonResult PearsonPerm(std::span<const double> xs,
                          std::span<const double> ys, int n_perm,
                          uint64_t seed) {
  if (n_perm < 1) throw InputError("n_perm must be positive");
  PearsonResult out;
  out.r = PearsonR(xs, ys);
  out.n_perm = n_perm;
  std::vector<double> shuffled(ys.begin(), ys.end());
  SplitMix64 rng(seed);
  int extreme = 0;
  const double observed = std::fabs(out.r);
  for (int i = 0; i < n_perm; ++i) {
    rng.Shuffle(std::span<double>(shuffled));
    // Slack so permutations equal to the observed order count as extreme.
    if (std::fabs(PearsonR(xs, shuffled)) >= observed - 1e-12) ++extreme;
  }
  out.p_value = (1.0 + extreme) / (1.0 + n_perm);
  return out;
}

double Accuracy(std::span<const double> scores, const std::vector<bool>& labels,
                double threshold, Orientation orientation) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw InputError("scores and labels must be non-empty and equal in size");
  }
  size_t correct = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = orientation == Orientation::kHigherIsMember
                               ? scores[i] > threshold
                               : scores[i] < threshold;
    if (predicted == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double ThresholdMaxAccuracy(std::span<const double> scores,
                            const std::vector<bool>& labels,
                            Orientation orientation) {
  if (scores.size() != labels.size()) {
    throw InputError("scores and labels differ in size");
  }
  const bool any_member = std::find(labels.begin(), labels.end(), true) != labels.end();
  const bool any_nonmember = std::find(labels.begin(), labels.end(), false) != labels.end();
  if (!any_member || !any_nonmember) {
    throw InputError("threshold calibration needs both labels");
  }
  // Work in the higher_is_member direction.
  const double sign = orientation == Orientation::kHigherIsMember ? 1.0 : -1.0;
  std::vector<std::pair<double, bool>> v;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw InputError("threshold input contains NaN");
    v.emplace_back(sign * scores[i], labels[i]);
  }
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> distinct;
  std::vector<size_t> members_at, nonmembers_at;
  for (const auto& [s, m] : v) {
    if (distinct.empty() || distinct.back() != s) {
      distinct.push_back(s);
      members_at.push_back(0);
      nonmembers_at.push_back(0);
    }
    (m ? members_at : nonmembers_at).back() += 1;
  }
  // Interval i (0..d) holds thresholds between distinct[i-1] and distinct[i];
  // everything at or below the threshold is predicted non-member.
  size_t total_members = 0;
  for (size_t c : members_at) total_members += c;
  const size_t d = distinct.size();
  std::vector<size_t> correct(d + 1);
  size_t nonmembers_below = 0, members_below = 0;
  for (size_t i = 0; i <= d; ++i) {
    correct[i] = nonmembers_below + (total_members - members_below);
    if (i < d) {
      nonmembers_below += nonmembers_at[i];
      members_below += members_at[i];
    }
  }
  const size_t best = *std::max_element(correct.begin(), correct.end());
  std::optional<size_t> widest;
  for (size_t i = 1; i < d; ++i) {
    if (correct[i] != best) continue;
    if (!widest || distinct[i] - distinct[i - 1] >
                       distinct[*widest] - distinct[*widest - 1]) {
      widest = i;
    }
  }
  double t;
  if (widest) {
    t = distinct[*widest - 1] + (distinct[*widest] - distinct[*widest - 1]) / 2.0;
  } else if (correct[0] == best) {
    t = distinct.front() - 1.0;
  } else {
    t = distinct.back() + 1.0;
  }
  return sign * t;
}

ConfidenceInterval BootstrapAuc(std::span<const double> members,
                                std::span<const double> nonmembers,
                                Orientation orientation, int resamples,
                                uint64_t seed, double level) {
  if (resamples < 1) throw InputError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw InputError("level must be in (0, 1)");
  SplitMix64 rng(seed);
  std::vector<double> aucs;
  aucs.reserve(resamples);
  std::vector<double> m(members.size()), n(nonmembers.size());
  for (int b = 0; b < resamples; ++b) {
    for (double& x : m) x = members[rng.UniformInt(members.size())];
    for (double& x : n) x = nonmembers[rng.UniformInt(nonmembers.size())];
    aucs.push_back(Auc(m, n, orientation));
  }
  std::sort(aucs.begin(), aucs.end());
  const double tail = (1.0 - level) / 2.0;
  const auto at = [&](double q) {
    const size_t i = static_cast<size_t>(std::floor(q * (resamples - 1) + 0.5));
    return aucs[std::min(i, aucs.size() - 1)];
  };
  double mean = 0.0;
  for (double a : aucs) mean += a;
  mean /= resamples;
  double var = 0.0;
  for (double a : aucs) var += (a - mean) * (a - mean);
  ConfidenceInterval ci;
  ci.lower = at(tail);
  ci.upper = at(1.0 - tail);
  ci.std_dev = resamples > 1 ? std::sqrt(var / (resamples - 1)) : 0.0;
  ci.resamples = resamples;
  return ci;
}

std::vector<CheckpointAuc> CheckpointCurve(
    const std::vector<ProviderSnapshot>& snapshots, const Provider* reference,
    const std::vector<std::string>& members,
    const std::vector<std::string>& nonmembers, Method method, double k,
    int workers) {
  if (snapshots.size() < 2) {
    throw InputError("a checkpoint curve needs at least two snapshots");
  }
  std::vector<const ProviderSnapshot*> ordered;
  for (const auto& s : snapshots) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->step < b->step; });
  return ParallelMap<CheckpointAuc>(
      ordered.size(), workers, [&](size_t i) {
        BuiltinProvider target(ordered[i]->model);
        std::vector<double> m, n;
        for (const auto& t : members) {
          m.push_back(ScoreText(method, target, reference, t, k).value);
        }
        for (const auto& t : nonmembers) {
          n.push_back(ScoreText(method, target, reference, t, k).value);
        }
        return CheckpointAuc{ordered[i]->step, Auc(m, n, OrientationOf(method))};
      });
}

EvaluationReport Evaluate(const std::vector<MembershipRecord>& records,
                          Method method, const EvalOptions& options) {
  EvaluationReport report;
  report.method = method;
  std::vector<double> m, n;
  SplitScores(records, method, m, n);
  report.n_members = m.size();
  report.n_nonmembers = n.size();
  report.auc = Auc(m, n, OrientationOf(method));
  if (options.bootstrap > 0) {
    report.ci = BootstrapAuc(m, n, OrientationOf(method), options.bootstrap,
                             DeriveSeed(options.seed, 1));
  }
  report.per_bucket = BucketedAuc(records, method);
  std::vector<double> xs, ys;
  for (const auto& b : report.per_bucket) {
    if (b.auc) {
      xs.push_back(b.bucket);
      ys.push_back(*b.auc);
    }
  }
  if (xs.size() < 3) {
    report.pearson_note = "fewer than 3 buckets with a defined AUC";
  } else if (options.n_perm < 1) {
    report.pearson_note = "permutation test disabled";
  } else {
    try {
      report.pearson = PearsonPerm(xs, ys, options.n_perm,
                                   DeriveSeed(options.seed, 2));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
      report.pearson_note = e.what();
    }
  }
  report.config = json{{"n_perm", options.n_perm},
                       {"bootstrap", options.bootstrap},
                       {"seed", options.seed}};
  return report;
}

json ToJson(const EvaluationReport& r) {
  json buckets = json::array();
  for (const auto& b : r.per_bucket) {
    buckets.push_back({{"bucket", b.bucket},
                       {"auc", b.auc ? json(*b.auc) : json(nullptr)},
                       {"n_members", b.n_members},
                       {"n_nonmembers", b.n_nonmembers}});
  }
  json checkpoints = json::array();
  for (const auto& c : r.per_checkpoint) {
    checkpoints.push_back({{"step", c.step}, {"auc", c.auc}});
  }
  json out{{"method", MethodName(r.method)},
           {"orientation", OrientationName(OrientationOf(r.method))},
           {"auc", r.auc},
           {"n_members", r.n_members},
           {"n_nonmembers", r.n_nonmembers},
           {"per_bucket", buckets},
           {"per_checkpoint", checkpoints},
           {"config", r.config}};
  out["ci"] = r.ci ? ToJson(*r.ci) : json(nullptr);
  if (r.pearson) {
    out["pearson"] = {{"r", r.pearson->r},
                      {"p_value", r.pearson->p_value},
                      {"n_perm", r.pearson->n_perm}};
  } else {
    out["pearson"] = nullptr;
    out["pearson_note"] = r.pearson_note;
  }
  return out;
}

void WriteCheckpointCsv(const std::filesystem::path& path,
                        const std::vector<CheckpointAuc>& curve) {
  std::string out = "step,auc\n";
  for (const auto& c : curve) {
    out += std::to_string(c.step) + "," + FormatDouble(c.auc) + "\n";
  }
  WriteFile(path, out);
}

void WriteBucketCsv(const std::filesystem::path& path,
                    const std::vector<BucketAuc>& buckets) {
  std::string out = "bucket,auc,n_members,n_nonmembers\n";
  for (const auto& b : buckets) {
    out += std::to_string(b.bucket) + "," +
           (b.auc ? FormatDouble(*b.auc) : std::string()) + "," +
           std::to_string(b.n_members) + "," + std::to_string(b.n_nonmembers) +
           "\n";
  }
  WriteFile(path, out);
}

}  // namespace trapkit
