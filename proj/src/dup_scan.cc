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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "trapkit/error.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

namespace {

constexpr uint64_t kBase = 0x100000001b3ULL;

// Polynomial hash of every window of a document, modulo 2^64.
std::vector<uint64_t> WindowHashes(const std::vector<TokenId>& ids,
                                   size_t window) {
  std::vector<uint64_t> out;
  if (ids.size() < window) return out;
  out.reserve(ids.size() - window + 1);
  uint64_t top = 1;  // kBase^(window-1)
  for (size_t i = 1; i < window; ++i) top *= kBase;
  uint64_t h = 0;
  for (size_t i = 0; i < window; ++i) h = h * kBase + (ids[i] + 1);
  out.push_back(h);
  for (size_t i = window; i < ids.size(); ++i) {
    h = (h - (ids[i - window] + 1) * top) * kBase + (ids[i] + 1);
    out.push_back(h);
  }
  return out;
}

struct Group {
  size_t doc = 0;
  size_t offset = 0;
  uint64_t count = 0;
  std::vector<WindowLocation> examples;
};

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::vector<DuplicateWindow> FindDuplicates(
    const std::vector<TokenizedDoc>& corpus, size_t window, uint64_t min_count,
    int workers) {
  if (window == 0) throw InputError("window must be at least 1 token");
  if (min_count == 0) throw InputError("min_count must be at least 1");
  const auto hashes = ParallelMap<std::vector<uint64_t>>(
      corpus.size(), workers,
      [&](size_t d) { return WindowHashes(corpus[d].ids, window); });

  std::unordered_map<uint64_t, uint64_t> hash_counts;
  for (const auto& doc : hashes) {
    for (uint64_t h : doc) ++hash_counts[h];
  }

  // Verification: split each candidate hash into exact-content groups.
  std::unordered_map<uint64_t, std::vector<Group>> groups;
  for (size_t d = 0; d < corpus.size(); ++d) {
    const auto& ids = corpus[d].ids;
    for (size_t off = 0; off < hashes[d].size(); ++off) {
      const uint64_t h = hashes[d][off];
      if (hash_counts[h] < min_count) continue;
      auto& bucket = groups[h];
      Group* match = nullptr;
      for (auto& g : bucket) {
        const auto& gids = corpus[g.doc].ids;
        if (std::equal(ids.begin() + off, ids.begin() + off + window,
                       gids.begin() + g.offset)) {
          match = &g;
          break;
        }
      }
      if (!match) {
        bucket.push_back(Group{d, off, 0, {}});
        match = &bucket.back();
      }
      ++match->count;
      if (match->examples.size() < kMaxExampleLocations) {
        match->examples.push_back({corpus[d].doc_id, off});
      }
    }
  }

  std::vector<DuplicateWindow> out;
  for (auto& [h, bucket] : groups) {
    for (auto& g : bucket) {
      if (g.count < min_count) continue;
      const auto& ids = corpus[g.doc].ids;
      out.push_back({{ids.begin() + g.offset, ids.begin() + g.offset + window},
                     g.count,
                     std::move(g.examples)});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.ids < b.ids;
  });
  return out;
}

std::vector<RepetitionBin> DefaultRepetitionBins() {
  std::vector<RepetitionBin> bins = {{6, 8}};
  for (uint64_t low = 8; low < 512; low *= 2) bins.push_back({low, low * 2});
  bins.push_back({512, 1025});
  return bins;
}

std::vector<BinPerplexity> PerplexityByRepetition(
    const std::vector<DuplicateWindow>& duplicates, const Provider& scorer,
    const std::vector<RepetitionBin>& bins, size_t samples_per_bin,
    uint64_t seed) {
  std::vector<RepetitionBin> sorted = bins;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.low < b.low; });
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].low >= sorted[i].high) throw InputError("empty repetition bin");
    if (i > 0 && sorted[i].low < sorted[i - 1].high) {
      throw InputError("repetition bins overlap");
    }
  }
  std::vector<BinPerplexity> out;
  for (size_t b = 0; b < bins.size(); ++b) {
    BinPerplexity stat;
    stat.bin = bins[b];
    std::vector<const DuplicateWindow*> in_bin;
    for (const auto& d : duplicates) {
      if (d.count >= bins[b].low && d.count < bins[b].high) in_bin.push_back(&d);
    }
    stat.available = in_bin.size();
    SplitMix64 rng(DeriveSeed(seed, b));
    const auto picked = rng.SampleWithoutReplacement(
        in_bin.size(), std::min(samples_per_bin, in_bin.size()));
    std::vector<double> ppl;
    for (uint64_t i : picked) {
      const TokenSequence seq{in_bin[i]->ids, scorer.id()};
      ppl.push_back(PerplexityFromLoss(SequenceLoss(scorer, seq)));
    }
    stat.n = ppl.size();
    if (!ppl.empty()) stat.median_perplexity = Median(std::move(ppl));
    out.push_back(stat);
  }
  return out;
}

json ToJson(const DuplicateWindow& w) {
  json locs = json::array();
  for (const auto& l : w.example_locations) {
    locs.push_back({{"doc_id", l.doc_id}, {"offset", l.offset}});
  }
  return json{{"ids", w.ids}, {"count", w.count}, {"example_locations", locs}};
}

void WriteDuplicates(const std::filesystem::path& path,
                     const std::vector<DuplicateWindow>& duplicates) {
  std::string out;
  for (const auto& d : duplicates) {
    out += ToJson(d).dump();
    out.push_back('\n');
  }
  WriteFile(path, out);
}

void WriteBinCsv(const std::filesystem::path& path,
                 const std::vector<BinPerplexity>& bins) {
  std::string out = "bin_low,bin_high,median_ppl,n\n";
  for (const auto& b : bins) {
    out += std::to_string(b.bin.low) + "," + std::to_string(b.bin.high) + "," +
           (b.median_perplexity ? FormatDouble(*b.median_perplexity) : "") +
           "," + std::to_string(b.n) + "\n";
  }
  WriteFile(path, out);
}

}  // namespace trapkit
