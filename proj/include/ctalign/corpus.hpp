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

// Report records, tokenization and the line-delimited corpus format.
//
// Corpus file: UTF-8, one JSON object per line,
//   {"id": "...", "text": "...", "findings": "...", "conclusion": "..."}
// with findings and conclusion optional. Blank lines are skipped.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctalign/error.hpp"
#include "json.hpp"

namespace ctalign {

struct Token {
  std::string text;  // lowercased
  std::size_t begin = 0;  // byte offsets into the source text, [begin, end)
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

namespace detail {

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Length of the UTF-8 sequence starting at s[i] and its code point. Invalid
// sequences decode as a single byte with code point 0xFFFD.
inline std::pair<std::size_t, char32_t> decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else {
    return {1, 0xFFFD};
  }
  if (i + len > s.size()) return {1, 0xFFFD};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {1, 0xFFFD};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {len, cp};
}

// Non-ASCII code points that separate tokens: multiplication sign (as in
// "5mm×6mm"), typographic dashes and quotes, ellipsis, no-break space and
// the common full-width punctuation.
inline bool is_separator_code_point(char32_t cp) {
  switch (cp) {
    case 0x00A0: case 0x00B7: case 0x00D7: case 0x2013: case 0x2014:
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: case 0x2026:
    case 0x3000: case 0x3001: case 0x3002: case 0xFF0C: case 0xFF1A:
    case 0xFF1B:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

// Pluggable tokenizer interface; WordTokenizer is the default.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
};

// Lowercasing word tokenizer. Tokens are maximal runs of ASCII letters and
// digits plus non-ASCII characters outside the separator set; everything
// else (whitespace, punctuation) separates tokens and is dropped.
class WordTokenizer : public Tokenizer {
 public:
  std::vector<Token> tokenize(std::string_view text) const override {
    std::vector<Token> out;
    Token cur;
    bool in_token = false;
    auto flush = [&](std::size_t end) {
      if (in_token) {
        cur.end = end;
        out.push_back(std::move(cur));
        cur = Token{};
        in_token = false;
      }
    };
    std::size_t i = 0;
    while (i < text.size()) {
      const auto c = static_cast<unsigned char>(text[i]);
      std::size_t len = 1;
      bool word = false;
      if (c < 0x80) {
        word = std::isalnum(c) != 0;
      } else {
        char32_t cp;
        std::tie(len, cp) = detail::decode_utf8(text, i);
        word = !detail::is_separator_code_point(cp);
      }
      if (word) {
        if (!in_token) {
          in_token = true;
          cur.begin = i;
        }
        for (std::size_t k = 0; k < len; ++k) cur.text.push_back(detail::ascii_lower(text[i + k]));
      } else {
        flush(i);
      }
      i += len;
    }
    flush(text.size());
    return out;
  }
};

inline const Tokenizer& default_tokenizer() {
  static const WordTokenizer tokenizer;
  return tokenizer;
}

inline std::vector<Token> tokenize(std::string_view text) {
  return default_tokenizer().tokenize(text);
}

inline std::vector<std::string> token_texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

// Lowercase, collapse whitespace runs, trim, and strip trailing periods.
// Idempotent.
inline std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    if (detail::is_ascii_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(detail::ascii_lower(ch));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

// Token ranges [begin, end) of the sentences in `text`. Sentences end at ';'
// or at a '.' that is not a decimal point between two digits.
inline std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    std::string_view text, const std::vector<Token>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (tokens.empty()) return out;
  auto is_digit = [&](std::size_t p) {
    return p < text.size() && std::isdigit(static_cast<unsigned char>(text[p])) != 0;
  };
  std::size_t start = 0;
  for (std::size_t k = 0; k + 1 < tokens.size(); ++k) {
    bool boundary = false;
    for (std::size_t p = tokens[k].end; p < tokens[k + 1].begin && !boundary; ++p) {
      if (text[p] == ';') boundary = true;
      if (text[p] == '.' && !(p > 0 && is_digit(p - 1) && is_digit(p + 1))) boundary = true;
    }
    if (boundary) {
      out.emplace_back(start, k + 1);
      start = k + 1;
    }
  }
  out.emplace_back(start, tokens.size());
  return out;
}

struct SectionConfig {
  std::vector<std::string> conclusion_markers = {"impression:", "conclusion:"};
};

// Conclusion section: text after the last occurrence of any marker
// (case-insensitive), or the whole text when no marker occurs.
inline std::string detect_conclusion(std::string_view text, const SectionConfig& cfg = {}) {
  std::string lowered(text);
  for (auto& ch : lowered) ch = detail::ascii_lower(ch);
  std::optional<std::size_t> after;
  for (const auto& marker : cfg.conclusion_markers) {
    const auto pos = lowered.rfind(marker);
    if (pos != std::string::npos && (!after || pos + marker.size() > *after)) {
      after = pos + marker.size();
    }
  }
  if (!after) return std::string(text);
  std::string_view rest = text.substr(*after);
  while (!rest.empty() && detail::is_ascii_space(static_cast<unsigned char>(rest.front()))) {
    rest.remove_prefix(1);
  }
  while (!rest.empty() && detail::is_ascii_space(static_cast<unsigned char>(rest.back()))) {
    rest.remove_suffix(1);
  }
  return std::string(rest);
}

class ReportRecord {
 public:
  ReportRecord(std::string id, std::string raw_text,
               std::optional<std::string> findings = std::nullopt,
               std::optional<std::string> conclusion = std::nullopt,
               const Tokenizer& tokenizer = default_tokenizer(),
               const SectionConfig& sections = {})
      : id_(std::move(id)),
        raw_text_(std::move(raw_text)),
        findings_field_(std::move(findings)),
        conclusion_field_(std::move(conclusion)),
        tokens_(tokenizer.tokenize(raw_text_)) {
    if (id_.empty()) throw ConfigError("report id must be nonempty");
    conclusion_ = conclusion_field_ ? *conclusion_field_ : detect_conclusion(raw_text_, sections);
  }

  const std::string& id() const { return id_; }
  const std::string& raw_text() const { return raw_text_; }
  const std::vector<Token>& tokens() const { return tokens_; }

  // Explicit section fields as they appeared in the input (for round trips).
  const std::optional<std::string>& findings_field() const { return findings_field_; }
  const std::optional<std::string>& conclusion_field() const { return conclusion_field_; }

  std::string findings() const { return findings_field_.value_or(""); }
  // Explicit conclusion, else the marker-detected section, else raw_text.
  const std::string& conclusion() const { return conclusion_; }

  bool operator==(const ReportRecord&) const = default;

 private:
  std::string id_;
  std::string raw_text_;
  std::optional<std::string> findings_field_;
  std::optional<std::string> conclusion_field_;
  std::vector<Token> tokens_;
  std::string conclusion_;
};

class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<ReportRecord> records) {
    for (auto& r : records) add(std::move(r));
  }

  void add(ReportRecord record) {
    if (index_.contains(record.id())) throw DuplicateIdError(record.id());
    index_.emplace(record.id(), records_.size());
    records_.push_back(std::move(record));
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ReportRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<ReportRecord>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::optional<std::size_t> position(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Corpus& other) const { return records_ == other.records_; }

 private:
  std::vector<ReportRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline ReportRecord parse_record_line(std::string_view line, std::size_t line_no,
                                      const Tokenizer& tokenizer = default_tokenizer(),
                                      const SectionConfig& sections = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw LineError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw LineError(line_no, "record must be a JSON object");
  auto required = [&](const char* key) -> std::string {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw LineError(line_no, std::string("missing or non-string field \"") + key + "\"");
    }
    return it->get<std::string>();
  };
  auto optional = [&](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw LineError(line_no, std::string("field \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
  };
  std::string id = required("id");
  if (id.empty()) throw LineError(line_no, "empty id");
  std::string text = required("text");
  return ReportRecord(std::move(id), std::move(text), optional("findings"),
                      optional("conclusion"), tokenizer, sections);
}

inline Corpus parse_corpus(std::istream& in, const Tokenizer& tokenizer = default_tokenizer(),
                           const SectionConfig& sections = {}) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](char c) { return detail::is_ascii_space(static_cast<unsigned char>(c)); })) {
      continue;
    }
    auto record = parse_record_line(line, line_no, tokenizer, sections);
    if (corpus.position(record.id())) {
      throw DuplicateIdError(record.id(), line_no);
    }
    corpus.add(std::move(record));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, const Tokenizer& tokenizer = default_tokenizer(),
                          const SectionConfig& sections = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path);
  return parse_corpus(in, tokenizer, sections);
}

// Canonical serialization: keys in the order id, text, findings, conclusion;
// optional fields only when they were given.
inline std::string format_record(const ReportRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id();
  j["text"] = r.raw_text();
  if (r.findings_field()) j["findings"] = *r.findings_field();
  if (r.conclusion_field()) j["conclusion"] = *r.conclusion_field();
  return j.dump();
}

inline void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& r : corpus) out << format_record(r) << '\n';
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_corpus(corpus, out);
}

}  // namespace ctalign
