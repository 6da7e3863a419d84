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

#ifndef TRAPKIT_RNG_H_
#define TRAPKIT_RNG_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace trapkit {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators", OOPSLA 2014). Every random decision in the toolkit draws from
// this stream so results are reproducible across implementations:
//
//   state += 0x9e3779b97f4a7c15
//   z = state
//   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
//
// Uniform01() takes the top 53 bits: (Next() >> 11) * 2^-53, in [0, 1).
// UniformInt(n) rejects draws >= the largest multiple of n below 2^64 and
// returns draw % n.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t Next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return Mix(state_);
  }

  double Uniform01() {
    return static_cast<double>(Next() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n) {
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    uint64_t x = Next();
    while (x >= limit) x = Next();
    return x % n;
  }

  // Fisher-Yates, walking from the back.
  template <typename T>
  void Shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct values from [0, n), in draw order. Requires k <= n.
  std::vector<uint64_t> SampleWithoutReplacement(uint64_t n, uint64_t k);

  static uint64_t Mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
};

// Independent child seed for sub-stream `stream` of `seed`.
inline uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  return SplitMix64::Mix(seed ^ ((stream + 1) * 0x9e3779b97f4a7c15ULL));
}

}  // namespace trapkit

#endif  // TRAPKIT_RNG_H_
