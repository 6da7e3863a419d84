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

#ifndef TRAPKIT_INJECTOR_H_
#define TRAPKIT_INJECTOR_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace trapkit {

// Where one trap was placed in one document. A gap g is the g-th single
// space (0x20) of the original text, i.e. the boundary after split piece g.
struct InjectionRecord {
  std::string doc_id;
  std::string trap_id;
  std::string trap_text;
  int n_rep = 0;
  std::vector<size_t> gap_indices;   // strictly increasing
  std::vector<size_t> char_offsets;  // byte offset of each trap occurrence
  std::string original_sha256;
};

struct Injection {
  std::string text;
  InjectionRecord record;
  // Occurrences of the trap text already present in the original. When
  // non-zero the modified text holds more than n_rep occurrences.
  size_t preexisting_occurrences = 0;
};

// Number of interior gaps: the count of 0x20 bytes.
size_t CountGaps(std::string_view text);

// Inserts " " + trap_text after the left word of n_rep distinct gaps drawn
// uniformly without replacement from seed. Throws kInput when n_rep exceeds
// the available gaps, n_rep < 1, or trap_text is empty.
Injection Inject(std::string_view doc_id, std::string_view doc_text,
                 std::string_view trap_id, std::string_view trap_text,
                 int n_rep, uint64_t seed);

// Exact inverse of Inject. Throws kIntegrity when the text does not match
// the record.
std::string Strip(std::string_view modified, const InjectionRecord& record);

// n_rep visually hidden block elements, each containing exactly trap_text
// (HTML-escaped), with no whitespace between elements.
std::string EmitHtmlTrap(std::string_view trap_text, int n_rep);

std::string HtmlEscape(std::string_view text);

nlohmann::json ToJson(const InjectionRecord& record);
InjectionRecord InjectionRecordFromJson(const nlohmann::json& j);

}  // namespace trapkit

#endif  // TRAPKIT_INJECTOR_H_
