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

#ifndef TRAPKIT_DUP_SCAN_H_
#define TRAPKIT_DUP_SCAN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trapkit/provider.h"

namespace trapkit {

struct TokenizedDoc {
  std::string doc_id;
  std::vector<TokenId> ids;
};

struct WindowLocation {
  std::string doc_id;
  size_t offset = 0;  // in tokens
};

struct DuplicateWindow {
  std::vector<TokenId> ids;
  uint64_t count = 0;
  std::vector<WindowLocation> example_locations;  // first 10 in scan order
};

constexpr size_t kMaxExampleLocations = 10;

// Every distinct window of `window` tokens occurring at least min_count
// times, overlapping occurrences included and never across documents.
// Sorted by count descending, then by ids. Throws kInput for window 0 or
// min_count 0.
std::vector<DuplicateWindow> FindDuplicates(
    const std::vector<TokenizedDoc>& corpus, size_t window, uint64_t min_count,
    int workers = 1);

// Repetition-count range [low, high).
struct RepetitionBin {
  uint64_t low = 0;
  uint64_t high = 0;
};

// [6,8), [8,16), ..., [256,512), [512,1025).
std::vector<RepetitionBin> DefaultRepetitionBins();

struct BinPerplexity {
  RepetitionBin bin;
  std::optional<double> median_perplexity;  // absent when n == 0
  size_t n = 0;          // windows sampled
  size_t available = 0;  // windows in the bin
};

// Per bin, up to samples_per_bin windows sampled without replacement and
// the median of their perplexities under scorer. Throws kInput for
// overlapping or empty bins.
std::vector<BinPerplexity> PerplexityByRepetition(
    const std::vector<DuplicateWindow>& duplicates, const Provider& scorer,
    const std::vector<RepetitionBin>& bins, size_t samples_per_bin,
    uint64_t seed);

nlohmann::json ToJson(const DuplicateWindow& window);
void WriteDuplicates(const std::filesystem::path& path,
                     const std::vector<DuplicateWindow>& duplicates);
// bin_low,bin_high,median_ppl,n
void WriteBinCsv(const std::filesystem::path& path,
                 const std::vector<BinPerplexity>& bins);

}  // namespace trapkit

#endif  // TRAPKIT_DUP_SCAN_H_
