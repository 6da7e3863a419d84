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

#include "trapkit/mia.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

namespace {

constexpr int kScoresVersion = 1;

bool IsCharStart(std::string_view text, size_t pos) {
  return pos >= text.size() ||
         (static_cast<unsigned char>(text[pos]) & 0xC0) != 0x80;
}

void CheckK(double k) {
  if (!(k > 0.0 && k <= 100.0)) {
    throw InputError("k must be in (0, 100], got " + std::to_string(k));
  }
}

TokenSequence TokenizeOrEmpty(const Provider& p, std::string_view text) {
  if (text.empty()) return TokenSequence{{}, p.id()};
  return p.Tokenize(text);
}

double Ratio(double loss_target, double loss_ref) {
  if (loss_ref == 0.0) {
    throw Error(ErrorCode::kDegenerate,
                "reference loss is 0: the reference predicts the text perfectly");
  }
  return loss_target / loss_ref;
}

}  // namespace

Orientation OrientationOf(Method method) {
  switch (method) {
    case Method::kMinK:
    case Method::kDocMinK:
      return Orientation::kHigherIsMember;
    case Method::kLoss:
    case Method::kRatio:
    case Method::kRatioCtx:
      break;
  }
  return Orientation::kLowerIsMember;
}

std::string MethodName(Method method) {
  switch (method) {
    case Method::kLoss: return "loss";
    case Method::kMinK: return "min_k";
    case Method::kRatio: return "ratio";
    case Method::kRatioCtx: return "ratio_ctx";
    case Method::kDocMinK: return "doc_min_k";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kLoss, Method::kMinK, Method::kRatio,
                   Method::kRatioCtx, Method::kDocMinK}) {
    if (MethodName(m) == name) return m;
  }
  throw InputError("unknown attack method '" + std::string(name) + "'");
}

std::string OrientationName(Orientation orientation) {
  return orientation == Orientation::kHigherIsMember ? "higher_is_member"
                                                     : "lower_is_member";
}

AttackScore LossAttack(const Provider& target, const TokenSequence& x) {
  return {Method::kLoss, SequenceLoss(target, x),
          OrientationOf(Method::kLoss), json::object()};
}

double MinKOfLogprobs(std::span<const double> logprobs, double k) {
  CheckK(k);
  const size_t n = logprobs.size();
  if (n == 0) throw InputError("min-k of an empty sequence");
  const size_t e = std::max<size_t>(
      1, static_cast<size_t>(std::ceil(k * static_cast<double>(n) / 100.0)));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return logprobs[a] < logprobs[b];
  });
  order.resize(std::min(e, n));
  // Sum in sequence order so k = 100 reproduces the loss sum bit for bit.
  std::sort(order.begin(), order.end());
  double sum = 0.0;
  for (size_t i : order) sum += logprobs[i];
  return sum / static_cast<double>(order.size());
}

AttackScore MinKProb(const Provider& target, const TokenSequence& x, double k) {
  CheckK(k);
  if (x.empty()) throw InputError("min-k of an empty sequence");
  return {Method::kMinK, MinKOfLogprobs(target.Score(x).logprobs, k),
          OrientationOf(Method::kMinK), json{{"k", k}}};
}

AttackScore RatioAttack(const Provider& target, const Provider& reference,
                        const TokenSequence& x_target,
                        const TokenSequence& x_ref) {
  const double lt = SequenceLoss(target, x_target);
  const double lr = SequenceLoss(reference, x_ref);
  return {Method::kRatio, Ratio(lt, lr), OrientationOf(Method::kRatio),
          json{{"loss_target", lt}, {"loss_ref", lr}}};
}

AttackScore RatioAttackText(const Provider& target, const Provider& reference,
                            std::string_view text) {
  return RatioAttack(target, reference, target.Tokenize(text),
                     reference.Tokenize(text));
}

std::string ContextSuffix(const Provider& counter, std::string_view prefix,
                          size_t ctx_len) {
  if (ctx_len == 0 || prefix.empty()) return {};
  auto fits = [&](size_t start) {
    return TokenizeOrEmpty(counter, prefix.substr(start)).size() <= ctx_len;
  };
  auto boundary = [&](size_t pos) {
    while (pos > 0 && !IsCharStart(prefix, pos)) --pos;
    return pos;
  };
  const size_t n = prefix.size();
  // Grow the window until it no longer fits; good is the last start known
  // to fit, bad the first known not to.
  size_t good = n;
  size_t width = 4 * ctx_len + 4;
  size_t bad;
  while (true) {
    const size_t start = width >= n ? 0 : boundary(n - width);
    if (fits(start)) {
      good = start;
      if (start == 0) return std::string(prefix);
      width *= 2;
    } else {
      bad = start;
      break;
    }
  }
  std::vector<size_t> starts;
  for (size_t s = bad + 1; s < good; ++s) {
    if (IsCharStart(prefix, s)) starts.push_back(s);
  }
  // Smallest start that fits, assuming the count shrinks as start grows.
  size_t lo = 0, hi = starts.size();
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (fits(starts[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const size_t start = lo < starts.size() ? starts[lo] : good;
  return std::string(prefix.substr(start));
}

AttackScore RatioWithContextText(const Provider& target,
                                 const Provider& reference,
                                 std::string_view text,
                                 std::string_view context) {
  const TokenSequence ctx_t = TokenizeOrEmpty(target, context);
  const TokenSequence ctx_r = TokenizeOrEmpty(reference, context);
  const double lt = SequenceLoss(target, target.Tokenize(text), ctx_t);
  const double lr = SequenceLoss(reference, reference.Tokenize(text), ctx_r);
  return {Method::kRatioCtx, Ratio(lt, lr), OrientationOf(Method::kRatioCtx),
          json{{"loss_target", lt},
               {"loss_ref", lr},
               {"context_tokens_target", ctx_t.size()},
               {"context_tokens_ref", ctx_r.size()}}};
}

AttackScore RatioWithContext(const Provider& target, const Provider& reference,
                             const InjectionRecord& record,
                             std::string_view original_doc, size_t ctx_len,
                             uint64_t seed) {
  if (record.char_offsets.empty()) {
    throw InputError("injection record for '" + record.doc_id +
                     "' has no occurrences");
  }
  if (original_doc.empty()) {
    throw InputError("original document '" + record.doc_id + "' is missing");
  }
  if (Sha256Hex(original_doc) != record.original_sha256) {
    throw InputError("original document '" + record.doc_id +
                     "' does not match its injection record");
  }
  SplitMix64 rng(seed);
  const size_t j = rng.UniformInt(record.char_offsets.size());
  const size_t pos =
      record.char_offsets[j] - 1 - j * (record.trap_text.size() + 1);
  std::string prefix(original_doc.substr(0, pos));
  prefix.push_back(' ');
  const std::string context = ContextSuffix(reference, prefix, ctx_len);
  AttackScore score =
      RatioWithContextText(target, reference, record.trap_text, context);
  score.params["ctx_len"] = ctx_len;
  score.params["occurrence"] = j;
  return score;
}

std::string NonMemberContext(const Provider& reference, std::string_view doc,
                             size_t ctx_len, uint64_t seed) {
  std::vector<size_t> spaces;
  for (size_t i = 0; i < doc.size(); ++i) {
    if (doc[i] == ' ') spaces.push_back(i);
  }
  if (spaces.empty()) throw InputError("non-member document has no word gaps");
  SplitMix64 rng(seed);
  std::string prefix(doc.substr(0, spaces[rng.UniformInt(spaces.size())]));
  prefix.push_back(' ');
  return ContextSuffix(reference, prefix, ctx_len);
}

std::vector<double> ExcerptMinKScores(const Provider& target,
                                      std::string_view doc, size_t excerpt_len,
                                      size_t n_excerpts, double k,
                                      uint64_t seed) {
  CheckK(k);
  if (excerpt_len == 0) throw InputError("excerpt length must be positive");
  const TokenSequence tokens = target.Tokenize(doc);
  if (tokens.size() < excerpt_len) {
    throw InputError("document has " + std::to_string(tokens.size()) +
                     " tokens, fewer than the excerpt length " +
                     std::to_string(excerpt_len));
  }
  SplitMix64 rng(seed);
  const uint64_t windows = tokens.size() - excerpt_len + 1;
  std::vector<double> out;
  out.reserve(n_excerpts);
  for (size_t i = 0; i < n_excerpts; ++i) {
    const size_t off = rng.UniformInt(windows);
    TokenSequence excerpt{
        {tokens.ids.begin() + static_cast<ptrdiff_t>(off),
         tokens.ids.begin() + static_cast<ptrdiff_t>(off + excerpt_len)},
        tokens.provider_id};
    out.push_back(MinKOfLogprobs(target.Score(excerpt).logprobs, k));
  }
  return out;
}

AttackScore DocMinK(const Provider& target, std::string_view doc,
                    size_t excerpt_len, size_t n_excerpts, double k,
                    double threshold, uint64_t seed) {
  if (n_excerpts == 0) throw InputError("n_excerpts must be positive");
  const auto scores =
      ExcerptMinKScores(target, doc, excerpt_len, n_excerpts, k, seed);
  const auto above = std::count_if(scores.begin(), scores.end(),
                                   [&](double s) { return s > threshold; });
  return {Method::kDocMinK,
          static_cast<double>(above) / static_cast<double>(scores.size()),
          OrientationOf(Method::kDocMinK),
          json{{"k", k},
               {"excerpt_len", excerpt_len},
               {"n_excerpts", n_excerpts},
               {"threshold", threshold}}};
}

AttackScore ScoreText(Method method, const Provider& target,
                      const Provider* reference, std::string_view text,
                      double k) {
  switch (method) {
    case Method::kLoss:
      return LossAttack(target, target.Tokenize(text));
    case Method::kMinK:
      return MinKProb(target, target.Tokenize(text), k);
    case Method::kRatio:
      if (!reference) throw InputError("ratio needs a reference provider");
      return RatioAttackText(target, *reference, text);
    case Method::kRatioCtx:
    case Method::kDocMinK:
      break;
  }
  throw InputError(MethodName(method) + " is not a context-free text method");
}

void MembershipRecord::AddScore(AttackScore score) {
  if (Find(score.method)) {
    throw InputError("record '" + ref + "' already has a " +
                     MethodName(score.method) + " score");
  }
  scores.push_back(std::move(score));
}

const AttackScore* MembershipRecord::Find(Method method) const {
  for (const auto& s : scores) {
    if (s.method == method) return &s;
  }
  return nullptr;
}

json ToJson(const AttackScore& s) {
  return json{{"method", MethodName(s.method)},
              {"value", s.value},
              {"orientation", OrientationName(s.orientation)},
              {"params", s.params}};
}

AttackScore AttackScoreFromJson(const json& j) {
  AttackScore s;
  s.method = ParseMethod(j.at("method").get<std::string>());
  s.value = j.at("value").get<double>();
  s.orientation = OrientationOf(s.method);
  if (j.at("orientation").get<std::string>() != OrientationName(s.orientation)) {
    throw Error(ErrorCode::kData,
                "orientation does not match method " + MethodName(s.method));
  }
  s.params = j.value("params", json::object());
  return s;
}

json ToJson(const MembershipRecord& r) {
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back(ToJson(s));
  return json{{"ref", r.ref},
              {"label", r.member ? "member" : "non-member"},
              {"scores", scores},
              {"bucket", r.bucket ? json(*r.bucket) : json(nullptr)},
              {"length", r.length},
              {"n_rep", r.n_rep}};
}

MembershipRecord MembershipRecordFromJson(const json& j) {
  try {
    MembershipRecord r;
    r.ref = j.at("ref").get<std::string>();
    const std::string label = j.at("label").get<std::string>();
    if (label != "member" && label != "non-member") {
      throw Error(ErrorCode::kData, "unknown label '" + label + "'");
    }
    r.member = label == "member";
    for (const auto& s : j.at("scores")) r.AddScore(AttackScoreFromJson(s));
    if (!j.at("bucket").is_null()) r.bucket = j["bucket"].get<int>();
    r.length = j.at("length").get<size_t>();
    r.n_rep = j.at("n_rep").get<int>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kData,
                std::string("malformed membership record: ") + e.what());
  }
}

void WriteScores(const std::filesystem::path& path,
                 const std::vector<MembershipRecord>& records,
                 const json& config) {
  std::string out = json{{"format", "trapkit.scores"},
                         {"version", kScoresVersion},
                         {"config", config}}
                        .dump();
  out.push_back('\n');
  for (const auto& r : records) {
    out += ToJson(r).dump();
    out.push_back('\n');
  }
  WriteFile(path, out);
}

ScoreSet ReadScores(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  ScoreSet set;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::kData, "malformed JSON line in " + path.string());
    }
    if (!header) {
      header = true;
      if (j.is_object() && j.value("format", "") == "trapkit.scores") {
        set.config = j.value("config", json::object());
        continue;
      }
    }
    set.records.push_back(MembershipRecordFromJson(j));
  }
  if (set.records.empty()) {
    throw InputError("score file " + path.string() + " holds no records");
  }
  return set;
}

}  // namespace trapkit
