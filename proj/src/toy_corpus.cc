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

#include "trapkit/toy_corpus.h"

#include <algorithm>
#include <unordered_set>

namespace trapkit {

namespace {

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m",
                                        "n", "p", "r", "s", "t", "v", "th",
                                        "st", "br", "gr", "ch"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ea", "ou"};

}  // namespace

ToyLexicon::ToyLexicon(uint64_t seed, size_t size) {
  SplitMix64 rng(seed);
  std::unordered_set<std::string> seen;
  while (words_.size() < size) {
    const uint64_t syllables = 1 + rng.UniformInt(3);
    std::string w;
    for (uint64_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.UniformInt(std::size(kOnsets))];
      w += kVowels[rng.UniformInt(std::size(kVowels))];
    }
    if (rng.UniformInt(3) == 0) w += kOnsets[rng.UniformInt(12)];
    if (seen.insert(w).second) words_.push_back(std::move(w));
  }
  // Short words are frequent.
  std::stable_sort(words_.begin(), words_.end(),
                   [](const std::string& a, const std::string& b) {
                     return a.size() < b.size();
                   });
  double total = 0.0;
  for (size_t r = 1; r <= words_.size(); ++r) {
    total += 1.0 / static_cast<double>(r);
    cdf_.push_back(total);
  }
  for (double& c : cdf_) c /= total;
}

std::string ToyLexicon::Word(SplitMix64& rng) const {
  const double u = rng.Uniform01();
  const size_t i = static_cast<size_t>(
      std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  return words_[std::min(i, words_.size() - 1)];
}

std::string ToyLexicon::Document(SplitMix64& rng, size_t n_words) const {
  std::string out;
  size_t until_stop = 6 + rng.UniformInt(13);
  for (size_t i = 0; i < n_words; ++i) {
    if (i > 0) out.push_back(' ');
    out += Word(rng);
    if (--until_stop == 0 || i + 1 == n_words) {
      out.push_back('.');
      until_stop = 6 + rng.UniformInt(13);
    }
  }
  return out;
}

std::vector<std::string> ToyDocuments(const ToyLexicon& lexicon, size_t n_docs,
                                      size_t n_words, uint64_t seed) {
  std::vector<std::string> docs;
  docs.reserve(n_docs);
  for (size_t d = 0; d < n_docs; ++d) {
    SplitMix64 rng(DeriveSeed(seed, d));
    docs.push_back(lexicon.Document(rng, n_words));
  }
  return docs;
}

}  // namespace trapkit
