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

#include <gtest/gtest.h>

#include "trapkit/error.h"
#include "trapkit/rng.h"
#include "trapkit/toy_corpus.h"
#include "trapkit/util.h"

namespace trapkit {
namespace {

// Independent removal: delete each recorded occurrence and its leading
// space from the modified text, right to left.
std::string RemoveOccurrences(std::string text, const InjectionRecord& r) {
  for (size_t j = r.char_offsets.size(); j-- > 0;) {
    text.erase(r.char_offsets[j] - 1, r.trap_text.size() + 1);
  }
  return text;
}

// Drops tags and decodes the five entities HtmlEscape produces.
std::string ExtractText(std::string_view html) {
  std::string raw;
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') in_tag = true;
    else if (c == '>') in_tag = false;
    else if (!in_tag) raw.push_back(c);
  }
  std::string out;
  const std::pair<std::string_view, char> entities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'},
      {"&#39;", '\''}};
  for (size_t i = 0; i < raw.size();) {
    bool matched = false;
    for (const auto& [name, ch] : entities) {
      if (raw.compare(i, name.size(), name) == 0) {
        out.push_back(ch);
        i += name.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(raw[i++]);
  }
  return out;
}

TEST(InjectTest, ForcedPlacement) {
  auto inj = Inject("d", "alpha beta", "t", "TRAP", 1, 0);
  EXPECT_EQ(inj.text, "alpha TRAP beta");
  EXPECT_EQ(inj.record.gap_indices, std::vector<size_t>{0});
  EXPECT_EQ(inj.record.char_offsets, std::vector<size_t>{6});
  EXPECT_EQ(Strip(inj.text, inj.record), "alpha beta");
}

TEST(InjectTest, TooManyRepetitionsNamesBothCounts) {
  try {
    Inject("d", "alpha beta", "t", "TRAP", 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInput);
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('1'), std::string::npos);
  }
}

TEST(InjectTest, RejectsBadArguments) {
  EXPECT_THROW(Inject("d", "a b c", "t", "", 1, 0), Error);
  EXPECT_THROW(Inject("d", "a b c", "t", "x", 0, 0), Error);
  EXPECT_THROW(Inject("d", "nospace", "t", "x", 1, 0), Error);
}

TEST(InjectTest, RandomDocumentsRoundTrip) {
  ToyLexicon lexicon(1);
  SplitMix64 rng(99);
  for (int c = 0; c < 30; ++c) {
    const std::string doc = lexicon.Document(rng, 500);
    const std::string trap = "zq" + lexicon.Word(rng) + " xv" + lexicon.Word(rng);
    auto inj = Inject("d", doc, "t", trap, 100, rng.Next());
    const auto& r = inj.record;
    ASSERT_EQ(r.gap_indices.size(), 100u);
    ASSERT_EQ(r.char_offsets.size(), 100u);
    for (size_t j = 1; j < 100; ++j) {
      EXPECT_LT(r.gap_indices[j - 1], r.gap_indices[j]);
      EXPECT_LT(r.char_offsets[j - 1], r.char_offsets[j]);
    }
    for (size_t off : r.char_offsets) {
      // Flanked by spaces or text boundaries: no word was split.
      EXPECT_EQ(inj.text[off - 1], ' ');
      const size_t end = off + trap.size();
      EXPECT_TRUE(end == inj.text.size() || inj.text[end] == ' ');
    }
    EXPECT_EQ(RemoveOccurrences(inj.text, r), doc);
    EXPECT_EQ(Strip(inj.text, r), doc);
    EXPECT_EQ(CountOccurrences(inj.text, trap), 100u);
    EXPECT_EQ(inj.preexisting_occurrences, 0u);
  }
}

TEST(InjectTest, Deterministic) {
  ToyLexicon lexicon(2);
  SplitMix64 rng(5);
  const std::string doc = lexicon.Document(rng, 200);
  auto a = Inject("d", doc, "t", "trap text", 20, 42);
  auto b = Inject("d", doc, "t", "trap text", 20, 42);
  auto c = Inject("d", doc, "t", "trap text", 20, 43);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(ToJson(a.record), ToJson(b.record));
  EXPECT_NE(a.record.gap_indices, c.record.gap_indices);
}

TEST(InjectTest, AllGapsUsed) {
  auto inj = Inject("d", "a b c d", "t", "T", 3, 7);
  EXPECT_EQ(inj.text, "a T b T c T d");
  EXPECT_EQ(Strip(inj.text, inj.record), "a b c d");
}

TEST(InjectTest, ConsecutiveSpacesAreSeparateGaps) {
  auto inj = Inject("d", "a  b", "t", "T", 2, 1);
  EXPECT_EQ(inj.text, "a T  T b");
  EXPECT_EQ(Strip(inj.text, inj.record), "a  b");
}

TEST(InjectTest, PreexistingOccurrencesReported) {
  auto inj = Inject("d", "x TRAP y z", "t", "TRAP", 1, 3);
  EXPECT_EQ(inj.preexisting_occurrences, 1u);
  EXPECT_EQ(CountOccurrences(inj.text, "TRAP"), 2u);
}

TEST(InjectTest, BookScaleDocument) {
  ToyLexicon lexicon(3);
  SplitMix64 rng(11);
  const std::string doc = lexicon.Document(rng, 98000);
  const std::string trap = "qux blorf zanthe";
  auto inj = Inject("book", doc, "t", trap, 1000, 8);
  EXPECT_EQ(Strip(inj.text, inj.record), doc);
  EXPECT_EQ(RemoveOccurrences(inj.text, inj.record), doc);
  EXPECT_EQ(CountOccurrences(inj.text, trap), 1000u);
}

TEST(StripTest, DetectsTampering) {
  auto inj = Inject("d", "one two three four five", "t", "TRAP", 2, 4);
  std::string tampered = inj.text;
  tampered[inj.record.char_offsets[1]] = 'X';
  try {
    Strip(tampered, inj.record);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
  }
  tampered = inj.text;
  tampered[0] = 'O';
  EXPECT_THROW(Strip(tampered, inj.record), Error);
  auto rec = inj.record;
  rec.gap_indices[0] += 1;
  EXPECT_THROW(Strip(inj.text, rec), Error);
  rec = inj.record;
  rec.char_offsets.pop_back();
  EXPECT_THROW(Strip(inj.text, rec), Error);
}

TEST(InjectionRecordTest, JsonRoundTrip) {
  auto inj = Inject("d", "a b c d e", "t", "T", 2, 9);
  auto back = InjectionRecordFromJson(ToJson(inj.record));
  EXPECT_EQ(ToJson(back), ToJson(inj.record));
  EXPECT_THROW(InjectionRecordFromJson(nlohmann::json{{"doc_id", "d"}}), Error);
}

TEST(EmitHtmlTest, SingleElement) {
  const std::string html = EmitHtmlTrap("hidden words", 1);
  EXPECT_EQ(html.find("<div"), 0u);
  EXPECT_EQ(html.find("<div", 1), std::string::npos);
  EXPECT_NE(html.find("left:-10000px"), std::string::npos);
  EXPECT_EQ(ExtractText(html), "hidden words");
}

TEST(EmitHtmlTest, ExtractionRepeatsTrap) {
  const std::string trap = "a<b & \"c\" 'd'>";
  const std::string html = EmitHtmlTrap(trap, 7);
  std::string expected;
  for (int i = 0; i < 7; ++i) expected += trap;
  EXPECT_EQ(ExtractText(html), expected);
  EXPECT_THROW(EmitHtmlTrap(trap, 0), Error);
}

}  // namespace
}  // namespace trapkit
