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

#ifndef TRAPKIT_TOY_CORPUS_H_
#define TRAPKIT_TOY_CORPUS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "trapkit/rng.h"

namespace trapkit {

// Pseudo-English text for desk-scale experiments: a fixed lexicon of
// consonant-vowel words drawn with Zipf(1) frequencies, grouped into
// sentences of 6 to 18 words. ASCII only.
class ToyLexicon {
 public:
  explicit ToyLexicon(uint64_t seed, size_t size = 2000);

  const std::vector<std::string>& words() const { return words_; }

  std::string Word(SplitMix64& rng) const;
  std::string Document(SplitMix64& rng, size_t n_words) const;

 private:
  std::vector<std::string> words_;
  std::vector<double> cdf_;
};

// n_docs documents of about n_words words each, fully determined by seed.
std::vector<std::string> ToyDocuments(const ToyLexicon& lexicon, size_t n_docs,
                                      size_t n_words, uint64_t seed);

}  // namespace trapkit

#endif  // TRAPKIT_TOY_CORPUS_H_
