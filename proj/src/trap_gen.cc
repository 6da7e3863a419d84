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

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "trapkit/error.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

uint64_t AttemptBudget(uint64_t max_attempts, int quota, const BucketSpec& spec) {
  if (max_attempts > 0) return max_attempts;
  return 200ULL * static_cast<uint64_t>(quota) * static_cast<uint64_t>(spec.count);
}

void CheckCommon(size_t target_len, int quota, const BucketSpec& spec) {
  if (target_len < 1) throw InputError("target length must be at least 1");
  if (quota < 1) throw InputError("quota per bucket must be at least 1");
  if (spec.count < 1 || !(spec.width > 0.0) || spec.floor < 1.0) {
    throw InputError("invalid bucket spec");
  }
}

// Outcome of one attempt before quota admission.
struct Candidate {
  std::optional<TrapSequence> trap;  // empty: rejected before bucketing
};

class Admission {
 public:
  Admission(int quota, const BucketSpec& spec) : quota_(quota) {
    report_.per_bucket.assign(spec.count, 0);
  }

  bool complete() const {
    for (int n : report_.per_bucket) {
      if (n < quota_) return false;
    }
    return true;
  }

  void Offer(Candidate&& c) {
    ++report_.attempts;
    if (!c.trap) {
      ++report_.rejected;
      return;
    }
    if (!c.trap->bucket) {
      ++report_.out_of_range;
      return;
    }
    int& slot = report_.per_bucket[*c.trap->bucket - 1];
    if (slot >= quota_) {
      ++report_.bucket_full;
      return;
    }
    ++slot;
    report_.traps.push_back(std::move(*c.trap));
  }

  GenerationReport Finish() && {
    report_.shortfall.clear();
    for (int n : report_.per_bucket) report_.shortfall.push_back(quota_ - n);
    return std::move(report_);
  }

 private:
  int quota_;
  GenerationReport report_;
};

std::string KindName(TrapKind kind) {
  return kind == TrapKind::kSynthetic ? "synthetic" : "real";
}

}  // namespace

std::optional<int> BucketOf(double perplexity, const BucketSpec& spec) {
  if (!(perplexity >= 1.0)) {
    throw InputError("perplexity below 1 is impossible: " +
                     std::to_string(perplexity));
  }
  if (perplexity < spec.floor) return std::nullopt;
  auto lower = [&](int i) { return spec.floor + (i - 1) * spec.width; };
  double raw = std::floor((perplexity - spec.floor) / spec.width) + 1.0;
  if (raw > spec.count + 1) return std::nullopt;
  int i = static_cast<int>(raw);
  // Division can land one bucket off right at an edge.
  while (i > 1 && perplexity < lower(i)) --i;
  while (perplexity >= lower(i + 1)) ++i;
  if (i < 1 || i > spec.count) return std::nullopt;
  return i;
}

std::vector<double> DefaultTemperatures() {
  std::vector<double> out;
  for (int i = 1; i <= 16; ++i) out.push_back(0.5 * i);
  return out;
}

bool GenerationReport::complete() const {
  if (shortfall.empty()) return false;
  for (int s : shortfall) {
    if (s > 0) return false;
  }
  return true;
}

int GenerationReport::total_shortfall() const {
  int total = 0;
  for (int s : shortfall) total += s;
  return total;
}

GenerationReport GenerateSynthetic(const Provider& reference,
                                   const SyntheticOptions& options) {
  CheckCommon(options.target_len, options.quota_per_bucket, options.spec);
  if (options.temperatures.empty()) {
    throw InputError("at least one temperature is required");
  }
  for (double t : options.temperatures) {
    if (!(t > 0.0)) throw InputError("temperatures must be positive");
  }
  const uint64_t budget =
      AttemptBudget(options.max_attempts, options.quota_per_bucket, options.spec);
  const TokenSequence empty_prompt{{}, reference.id()};

  auto attempt_fn = [&](uint64_t attempt) -> Candidate {
    SamplingParams params;
    params.max_new = options.target_len;
    params.top_k = options.top_k;
    params.temperature =
        options.temperatures[attempt % options.temperatures.size()];
    params.seed = DeriveSeed(options.seed, attempt);
    Generation g = SampleExact(reference, empty_prompt, params);
    if (g.tokens.size() > options.target_len) {
      g.tokens.ids.resize(options.target_len);
      auto text = reference.Detokenize(g.tokens);
      if (!text) return {};
      g.text = std::move(*text);
    }
    if (!IsValidUtf8(g.text)) return {};
    TrapSequence trap;
    trap.id = "syn-L" + std::to_string(options.target_len) + "-s" +
              std::to_string(options.seed) + "-" + std::to_string(attempt);
    trap.text = std::move(g.text);
    trap.tokens = std::move(g.tokens);
    if (trap.tokens.provider_id.empty()) trap.tokens.provider_id = reference.id();
    trap.perplexity = PerplexityFromLoss(SequenceLoss(reference, trap.tokens));
    trap.bucket = BucketOf(trap.perplexity, options.spec);
    trap.kind = TrapKind::kSynthetic;
    trap.temperature = params.temperature;
    trap.seed = params.seed;
    return {std::move(trap)};
  };

  Admission admission(options.quota_per_bucket, options.spec);
  const uint64_t batch = 8ULL * static_cast<uint64_t>(std::max(options.workers, 1));
  for (uint64_t start = 0; start < budget && !admission.complete();
       start += batch) {
    const uint64_t n = std::min(batch, budget - start);
    auto candidates = ParallelMap<Candidate>(
        static_cast<size_t>(n), options.workers,
        [&](size_t i) { return attempt_fn(start + i); });
    // Admission runs in attempt order, so results do not depend on workers.
    for (auto& c : candidates) {
      if (admission.complete()) break;
      admission.Offer(std::move(c));
    }
  }
  return std::move(admission).Finish();
}

GenerationReport SampleReal(std::string_view doc_id, std::string_view doc_text,
                            const Provider& reference,
                            const RealOptions& options) {
  CheckCommon(options.target_len, options.quota_per_bucket, options.spec);
  const TokenSequence doc = reference.Tokenize(doc_text);
  if (doc.size() < options.target_len) {
    throw InputError("document '" + std::string(doc_id) + "' has " +
                     std::to_string(doc.size()) + " tokens, fewer than " +
                     std::to_string(options.target_len));
  }
  if (!reference.Detokenize(TokenSequence{{}, reference.id()})) {
    throw Error(ErrorCode::kCapability,
                "provider '" + reference.id() +
                    "' cannot detokenize windows for real traps");
  }
  const uint64_t windows = doc.size() - options.target_len + 1;
  const uint64_t budget =
      AttemptBudget(options.max_attempts, options.quota_per_bucket, options.spec);
  SplitMix64 rng(options.seed);
  std::unordered_set<uint64_t> seen;
  Admission admission(options.quota_per_bucket, options.spec);
  for (uint64_t attempt = 0; attempt < budget && !admission.complete() &&
                             seen.size() < windows;
       ++attempt) {
    const uint64_t offset = rng.UniformInt(windows);
    if (!seen.insert(offset).second) {
      admission.Offer({});
      continue;
    }
    TrapSequence trap;
    trap.tokens.provider_id = doc.provider_id;
    trap.tokens.ids.assign(doc.ids.begin() + static_cast<ptrdiff_t>(offset),
                           doc.ids.begin() +
                               static_cast<ptrdiff_t>(offset + options.target_len));
    auto text = reference.Detokenize(trap.tokens);
    if (!text || !IsValidUtf8(*text)) {
      admission.Offer({});
      continue;
    }
    trap.id = "real-" + std::string(doc_id) + "-o" + std::to_string(offset) +
              "-s" + std::to_string(options.seed);
    trap.text = std::move(*text);
    trap.perplexity = PerplexityFromLoss(SequenceLoss(reference, trap.tokens));
    trap.bucket = BucketOf(trap.perplexity, options.spec);
    trap.kind = TrapKind::kReal;
    trap.source_doc = std::string(doc_id);
    trap.seed = options.seed;
    admission.Offer({std::move(trap)});
  }
  return std::move(admission).Finish();
}

void MatchStratification(std::vector<TrapSequence>& a,
                         std::vector<TrapSequence>& b) {
  std::map<int, int> count_a, count_b;
  for (const auto& t : a) ++count_a[t.bucket.value_or(0)];
  for (const auto& t : b) ++count_b[t.bucket.value_or(0)];
  auto trim = [&](std::vector<TrapSequence>& v) {
    std::map<int, int> kept;
    std::vector<TrapSequence> out;
    for (auto& t : v) {
      const int bucket = t.bucket.value_or(0);
      const int limit = std::min(count_a[bucket], count_b[bucket]);
      if (kept[bucket] < limit) {
        ++kept[bucket];
        out.push_back(std::move(t));
      }
    }
    v = std::move(out);
  };
  trim(a);
  trim(b);
}

json ToJson(const TrapSequence& trap) {
  json j;
  j["id"] = trap.id;
  j["text"] = trap.text;
  j["ids"] = trap.tokens.ids;
  j["provider_id"] = trap.tokens.provider_id;
  j["length"] = trap.length();
  j["perplexity"] = trap.perplexity;
  j["bucket"] = trap.bucket ? json(*trap.bucket) : json(nullptr);
  j["kind"] = KindName(trap.kind);
  j["temperature"] = trap.temperature ? json(*trap.temperature) : json(nullptr);
  j["source_doc"] = trap.source_doc.empty() ? json(nullptr) : json(trap.source_doc);
  j["seed"] = trap.seed;
  j["member"] = trap.member;
  return j;
}

TrapSequence TrapFromJson(const json& j) {
  try {
    TrapSequence trap;
    trap.id = j.at("id").get<std::string>();
    trap.text = j.at("text").get<std::string>();
    trap.tokens.ids = j.at("ids").get<std::vector<TokenId>>();
    trap.tokens.provider_id = j.at("provider_id").get<std::string>();
    trap.perplexity = j.at("perplexity").get<double>();
    if (!j.at("bucket").is_null()) trap.bucket = j["bucket"].get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "synthetic" && kind != "real") {
      throw Error(ErrorCode::kData, "unknown trap kind '" + kind + "'");
    }
    trap.kind = kind == "synthetic" ? TrapKind::kSynthetic : TrapKind::kReal;
    if (!j.at("temperature").is_null()) {
      trap.temperature = j["temperature"].get<double>();
    }
    if (!j.at("source_doc").is_null()) {
      trap.source_doc = j["source_doc"].get<std::string>();
    }
    trap.seed = j.at("seed").get<uint64_t>();
    trap.member = j.at("member").get<bool>();
    if (j.at("length").get<size_t>() != trap.tokens.size()) {
      throw Error(ErrorCode::kData, "trap '" + trap.id + "' length mismatch");
    }
    return trap;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kData, std::string("malformed trap record: ") + e.what());
  }
}

void WriteTrapSet(const std::filesystem::path& path,
                  const std::vector<TrapSequence>& traps, const json& config) {
  std::string out = json{{"format", "trapkit.traps"},
                         {"version", kFormatVersion},
                         {"config", config}}
                        .dump();
  out.push_back('\n');
  for (const auto& t : traps) {
    out += ToJson(t).dump();
    out.push_back('\n');
  }
  WriteFile(path, out);
}

TrapSet ReadTrapSet(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  TrapSet set;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kData, path.string() + " is empty");
  }
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "trapkit.traps") {
    throw Error(ErrorCode::kData, path.string() + " lacks a trap-set header");
  }
  set.config = header.value("config", json::object());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::kData, "malformed JSON line in " + path.string());
    }
    set.traps.push_back(TrapFromJson(j));
  }
  return set;
}

}  // namespace trapkit
