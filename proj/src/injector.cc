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

#include "trapkit/injector.h"

#include <algorithm>

#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

namespace {

constexpr std::string_view kHiddenOpen =
    "<div aria-hidden=\"true\" style=\"position:absolute;left:-10000px;"
    "top:auto;width:1px;height:1px;overflow:hidden\">";
constexpr std::string_view kHiddenClose = "</div>";

std::vector<size_t> SpacePositions(std::string_view text) {
  std::vector<size_t> out;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ' ') out.push_back(i);
  }
  return out;
}

Error Integrity(const std::string& what) {
  return Error(ErrorCode::kIntegrity, what);
}

}  // namespace

size_t CountGaps(std::string_view text) {
  return static_cast<size_t>(std::count(text.begin(), text.end(), ' '));
}

Injection Inject(std::string_view doc_id, std::string_view doc_text,
                 std::string_view trap_id, std::string_view trap_text,
                 int n_rep, uint64_t seed) {
  if (trap_text.empty()) throw InputError("trap text is empty");
  if (n_rep < 1) throw InputError("n_rep must be at least 1");
  const std::vector<size_t> spaces = SpacePositions(doc_text);
  if (static_cast<size_t>(n_rep) > spaces.size()) {
    throw InputError("n_rep " + std::to_string(n_rep) + " exceeds the " +
                     std::to_string(spaces.size()) +
                     " word gaps available in document '" +
                     std::string(doc_id) + "'");
  }
  SplitMix64 rng(seed);
  std::vector<uint64_t> picked = rng.SampleWithoutReplacement(spaces.size(), n_rep);
  std::sort(picked.begin(), picked.end());

  Injection out;
  InjectionRecord& rec = out.record;
  rec.doc_id = doc_id;
  rec.trap_id = trap_id;
  rec.trap_text = trap_text;
  rec.n_rep = n_rep;
  rec.original_sha256 = Sha256Hex(doc_text);
  out.preexisting_occurrences = CountOccurrences(doc_text, trap_text);

  out.text.reserve(doc_text.size() + n_rep * (trap_text.size() + 1));
  size_t copied = 0;
  for (uint64_t g : picked) {
    const size_t pos = spaces[g];
    out.text.append(doc_text.substr(copied, pos - copied));
    out.text.push_back(' ');
    rec.gap_indices.push_back(static_cast<size_t>(g));
    rec.char_offsets.push_back(out.text.size());
    out.text.append(trap_text);
    copied = pos;
  }
  out.text.append(doc_text.substr(copied));
  return out;
}

std::string Strip(std::string_view modified, const InjectionRecord& record) {
  const size_t n = static_cast<size_t>(std::max(record.n_rep, 0));
  const size_t len = record.trap_text.size();
  if (record.n_rep < 1 || len == 0 || record.char_offsets.size() != n ||
      record.gap_indices.size() != n) {
    throw Integrity("injection record for '" + record.doc_id +
                    "' is inconsistent");
  }
  if (modified.size() < n * (len + 1)) {
    throw Integrity("text too short for its injection record");
  }
  std::string original;
  original.reserve(modified.size() - n * (len + 1));
  size_t copied = 0;
  for (size_t j = 0; j < n; ++j) {
    const size_t off = record.char_offsets[j];
    if (off < copied + 1 || off + len > modified.size() ||
        modified[off - 1] != ' ' ||
        modified.substr(off, len) != record.trap_text) {
      throw Integrity("occurrence " + std::to_string(j) + " of trap '" +
                      record.trap_id + "' not found at offset " +
                      std::to_string(off));
    }
    original.append(modified.substr(copied, off - 1 - copied));
    copied = off + len;
  }
  original.append(modified.substr(copied));
  if (Sha256Hex(original) != record.original_sha256) {
    throw Integrity("stripped text of '" + record.doc_id +
                    "' does not match the original hash");
  }
  // Each occurrence must sit at its recorded gap.
  const std::vector<size_t> spaces = SpacePositions(original);
  for (size_t j = 0; j < n; ++j) {
    const size_t pos = record.char_offsets[j] - 1 - j * (len + 1);
    const size_t g = record.gap_indices[j];
    if (g >= spaces.size() || spaces[g] != pos) {
      throw Integrity("occurrence " + std::to_string(j) +
                      " does not match its recorded gap");
    }
  }
  return original;
}

std::string HtmlEscape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string EmitHtmlTrap(std::string_view trap_text, int n_rep) {
  if (n_rep < 1) throw InputError("n_rep must be at least 1");
  const std::string escaped = HtmlEscape(trap_text);
  std::string out;
  out.reserve(n_rep * (kHiddenOpen.size() + escaped.size() + kHiddenClose.size()));
  for (int i = 0; i < n_rep; ++i) {
    out.append(kHiddenOpen);
    out.append(escaped);
    out.append(kHiddenClose);
  }
  return out;
}

json ToJson(const InjectionRecord& r) {
  return json{{"doc_id", r.doc_id},
              {"trap_id", r.trap_id},
              {"trap_text", r.trap_text},
              {"n_rep", r.n_rep},
              {"gap_indices", r.gap_indices},
              {"char_offsets", r.char_offsets},
              {"original_sha256", r.original_sha256}};
}

InjectionRecord InjectionRecordFromJson(const json& j) {
  try {
    InjectionRecord r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.trap_id = j.at("trap_id").get<std::string>();
    r.trap_text = j.at("trap_text").get<std::string>();
    r.n_rep = j.at("n_rep").get<int>();
    r.gap_indices = j.at("gap_indices").get<std::vector<size_t>>();
    r.char_offsets = j.at("char_offsets").get<std::vector<size_t>>();
    r.original_sha256 = j.at("original_sha256").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kData,
                std::string("malformed injection record: ") + e.what());
  }
}

}  // namespace trapkit
