// Copyright 2026 The ctalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cctype>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "ctalign/corpus.hpp"
#include "ctalign/rng.hpp"

namespace ctalign {
namespace {

using Strings = std::vector<std::string>;

Strings words(std::string_view s) { return token_texts(tokenize(s)); }

TEST(Tokenize, Examples) {
  EXPECT_EQ(words("Solid nodule in the right upper lung."),
            (Strings{"solid", "nodule", "in", "the", "right", "upper", "lung"}));
  EXPECT_EQ(words("nodule size is 5mm×6mm"), (Strings{"nodule", "size", "is", "5mm", "6mm"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Tokenize, PunctuationAndUnicode) {
  EXPECT_EQ(words("Ground-glass, (patchy); 3.5cm"),
            (Strings{"ground", "glass", "patchy", "3", "5cm"}));
  EXPECT_EQ(words("Nodule\t\n  LEFT"), (Strings{"nodule", "left"}));
  EXPECT_EQ(words("a\xe2\x80\x94" "b"), (Strings{"a", "b"}));          // em dash separates
  EXPECT_EQ(words("caf\xc3\xa9"), (Strings{"caf\xc3\xa9"}));           // letters kept whole
}

TEST(Tokenize, SpansReconstructSource) {
  Xoshiro256 rng(21);
  const std::string alphabet = "abcXYZ019 .,;:-()\t\n";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s(rng.below(40), ' ');
    for (auto& c : s) c = alphabet[rng.below(alphabet.size())];
    const auto tokens = tokenize(s);
    std::size_t prev_end = 0;
    for (const auto& t : tokens) {
      ASSERT_LT(t.begin, t.end);
      ASSERT_GE(t.begin, prev_end);
      std::string src = s.substr(t.begin, t.end - t.begin);
      for (auto& c : src) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      ASSERT_EQ(src, t.text);
      prev_end = t.end;
    }
    EXPECT_EQ(tokenize(s), tokens);
  }
}

TEST(NormalizeText, Examples) {
  EXPECT_EQ(normalize_text("  Show NO  obvious abnormality. "), "show no obvious abnormality");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("A  b.  "), "a b");
  EXPECT_EQ(normalize_text("end.."), "end");
  EXPECT_EQ(normalize_text(" . "), "");
}

TEST(NormalizeText, IdempotentOnRandomStrings) {
  Xoshiro256 rng(4);
  const std::string alphabet = "aB .\t\n.xY;";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s(rng.below(30), ' ');
    for (auto& c : s) c = alphabet[rng.below(alphabet.size())];
    const auto once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once) << '"' << s << '"';
  }
}

TEST(Sentences, SplitOnPeriodAndSemicolon) {
  const std::string text = "Nodule 3.5mm in lung; no effusion. Emphysema";
  const auto tokens = tokenize(text);
  const auto sentences = split_sentences(text, tokens);
  ASSERT_EQ(sentences.size(), 3u);
  EXPECT_EQ(sentences[0], std::make_pair(std::size_t{0}, std::size_t{5}));
  EXPECT_EQ(tokens[sentences[1].first].text, "no");
  EXPECT_EQ(tokens[sentences[2].first].text, "emphysema");
  EXPECT_TRUE(split_sentences("", {}).empty());
}

TEST(Sections, ConclusionDetection) {
  EXPECT_EQ(detect_conclusion("Findings: x. Impression: Both lungs clear."), "Both lungs clear.");
  EXPECT_EQ(detect_conclusion("CONCLUSION: a. Impression: b"), "b");
  EXPECT_EQ(detect_conclusion("no markers here"), "no markers here");
  const ReportRecord explicit_fields("x", "Impression: ignored", "f", "the conclusion");
  EXPECT_EQ(explicit_fields.conclusion(), "the conclusion");
  EXPECT_EQ(explicit_fields.findings(), "f");
  const ReportRecord fallback("y", "Findings: a. Impression: b.");
  EXPECT_EQ(fallback.conclusion(), "b.");
  EXPECT_EQ(fallback.findings(), "");
}

TEST(Record, Validation) {
  EXPECT_THROW(ReportRecord("", "text"), Error);
  const ReportRecord r("a", "Solid nodule.");
  EXPECT_EQ(r.tokens(), tokenize("Solid nodule."));
}

TEST(LoadCorpus, TwoLines) {
  std::istringstream in(R"({"id": "a", "text": "First report."}
{"id": "b", "text": "Second.", "conclusion": "ok"}
)");
  const auto c = parse_corpus(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].id(), "a");
  EXPECT_EQ(c[1].id(), "b");
  EXPECT_EQ(c[1].conclusion(), "ok");
  EXPECT_EQ(c.position("b"), std::optional<std::size_t>(1));
  EXPECT_FALSE(c.position("z").has_value());
}

TEST(LoadCorpus, DuplicateIdNamed) {
  std::istringstream in(R"({"id": "p1", "text": "a"}
{"id": "p2", "text": "b"}
{"id": "p1", "text": "c"}
)");
  try {
    parse_corpus(in);
    FAIL();
  } catch (const DuplicateIdError& e) {
    EXPECT_EQ(e.id(), "p1");
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("\"p1\""), std::string::npos);
  }
}

TEST(LoadCorpus, EmptyFileIsValid) {
  std::istringstream in("");
  EXPECT_TRUE(parse_corpus(in).empty());
}

TEST(LoadCorpus, MalformedLinesCiteLineNumber) {
  for (const char* bad : {"{\"id\": \"a\"}", "not json", "{\"id\": 3, \"text\": \"x\"}",
                          "[1, 2]", "{\"id\": \"\", \"text\": \"x\"}"}) {
    std::istringstream in(std::string("{\"id\": \"ok\", \"text\": \"t\"}\n") + bad + "\n");
    try {
      parse_corpus(in);
      FAIL() << bad;
    } catch (const LineError& e) {
      EXPECT_EQ(e.line(), 2u) << bad;
    }
  }
  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), Error);
}

TEST(LoadCorpus, FileRoundTrip) {
  Corpus c;
  c.add(ReportRecord("a", "Solid nodule in the right upper lung.", std::nullopt, "nodule"));
  c.add(ReportRecord("b", "Line with \"quotes\" and unicode 5mm×6mm", "findings text", std::nullopt));
  c.add(ReportRecord("c", ""));
  const auto path = std::filesystem::temp_directory_path() / "ctalign_corpus_rt.jsonl";
  write_corpus(c, path.string());
  const auto back = load_corpus(path.string());
  EXPECT_EQ(back, c);
  std::ostringstream first, second;
  write_corpus(c, first);
  write_corpus(back, second);
  EXPECT_EQ(first.str(), second.str());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace ctalign
