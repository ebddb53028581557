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

// Keyword-based pathology labeler with sentence-scoped negation, plus the
// "healthy report" detector used to correct contrastive false negatives.

#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctalign/corpus.hpp"
#include "ctalign/error.hpp"
#include "json.hpp"

namespace ctalign {

enum class Pathology : std::size_t {
  kNodule,
  kOpacity,
  kPleuralEffusion,
  kEmphysema,
  kInflammation,
  kCalcification,
};

inline constexpr std::size_t kNumPathologies = 6;

inline constexpr std::array<std::string_view, kNumPathologies> kPathologyNames = {
    "nodule", "opacity", "pleural_effusion", "emphysema", "inflammation", "calcification"};

inline constexpr std::array<Pathology, kNumPathologies> kAllPathologies = {
    Pathology::kNodule,    Pathology::kOpacity,      Pathology::kPleuralEffusion,
    Pathology::kEmphysema, Pathology::kInflammation, Pathology::kCalcification};

inline constexpr std::size_t index_of(Pathology p) { return static_cast<std::size_t>(p); }
inline constexpr std::string_view name_of(Pathology p) { return kPathologyNames[index_of(p)]; }

inline std::optional<Pathology> pathology_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumPathologies; ++i) {
    if (kPathologyNames[i] == name) return kAllPathologies[i];
  }
  return std::nullopt;
}

// One keyword with its token form under the corpus tokenizer, so that
// "air-space disease" and "air space disease" both match [air, space, disease].
struct Keyword {
  std::string text;
  std::vector<std::string> tokens;
};

class KeywordTable {
 public:
  using Lists = std::array<std::vector<std::string>, kNumPathologies>;

  explicit KeywordTable(const Lists& lists) {
    for (std::size_t p = 0; p < kNumPathologies; ++p) {
      if (lists[p].empty()) {
        throw ConfigError("keyword table: no keywords for " + std::string(kPathologyNames[p]));
      }
      for (const auto& kw : lists[p]) {
        for (char c : kw) {
          if (c >= 'A' && c <= 'Z') throw ConfigError("keyword table: keyword not lowercase: " + kw);
        }
        auto toks = token_texts(tokenize(kw));
        if (toks.empty()) throw ConfigError("keyword table: empty keyword for " + std::string(kPathologyNames[p]));
        keywords_[p].push_back({kw, std::move(toks)});
      }
    }
  }

  const std::vector<Keyword>& keywords(Pathology p) const { return keywords_[index_of(p)]; }

  // Keyword lists for the six evaluation pathologies.
  static const KeywordTable& defaults() {
    static const KeywordTable table(Lists{{
        {"nodule", "nodules", "nodular"},
        {"opacity", "opacities", "decreased translucency", "increased density",
         "airspace disease", "air-space disease", "air space disease", "infiltrate",
         "infiltration", "interstitial marking", "interstitial pattern", "interstitial lung",
         "reticular pattern", "reticular marking", "reticulation", "parenchymal scarring",
         "peribronchial thickening", "wall thickening", "scar"},
        {"pleural fluid", "pleural effusion"},
        {"emphysema"},
        {"inflammation", "pneumonia", "infection", "infectious process", "infectious"},
        {"calcification", "calcifications"},
    }});
    return table;
  }

  // {"nodule": [...], "opacity": [...], ...}; all six entities required.
  static KeywordTable from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("keyword table must be a JSON object");
    Lists lists;
    std::array<bool, kNumPathologies> seen{};
    for (const auto& [name, value] : j.items()) {
      const auto p = pathology_from_name(name);
      if (!p) throw ConfigError("keyword table: unknown entity \"" + name + "\"");
      if (!value.is_array()) throw ConfigError("keyword table: \"" + name + "\" must map to a list");
      for (const auto& kw : value) {
        if (!kw.is_string()) throw ConfigError("keyword table: non-string keyword for " + name);
        lists[index_of(*p)].push_back(kw.get<std::string>());
      }
      seen[index_of(*p)] = true;
    }
    for (std::size_t p = 0; p < kNumPathologies; ++p) {
      if (!seen[p]) throw ConfigError("keyword table: missing entity " + std::string(kPathologyNames[p]));
    }
    return KeywordTable(lists);
  }

  static KeywordTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open keyword table " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("keyword table " + path + ": " + e.what());
    }
  }

 private:
  std::array<std::vector<Keyword>, kNumPathologies> keywords_;
};

// Negation cues and scope breakers, matched as whole-token sequences.
struct NegationConfig {
  std::vector<std::string> cues = {"no", "without", "no evident", "free of", "negative for"};
  std::vector<std::string> scope_breakers = {"but", "however"};
};

namespace detail {

inline bool tokens_match_at(const std::vector<Token>& tokens, std::size_t at,
                            const std::vector<std::string>& pattern) {
  if (pattern.empty() || at + pattern.size() > tokens.size()) return false;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    if (tokens[at + k].text != pattern[k]) return false;
  }
  return true;
}

}  // namespace detail

// True iff a negation cue occurs inside [sentence_begin, match_begin) and no
// scope breaker lies between the end of that cue and the match.
inline bool is_negated(std::size_t match_begin, std::size_t sentence_begin,
                       const std::vector<Token>& tokens, const NegationConfig& cfg = {}) {
  for (const auto& cue : cfg.cues) {
    const auto cue_tokens = token_texts(tokenize(cue));
    if (cue_tokens.empty() || match_begin < sentence_begin + cue_tokens.size()) continue;
    for (std::size_t c = sentence_begin; c + cue_tokens.size() <= match_begin; ++c) {
      if (!detail::tokens_match_at(tokens, c, cue_tokens)) continue;
      bool broken = false;
      for (std::size_t k = c + cue_tokens.size(); k < match_begin && !broken; ++k) {
        for (const auto& br : cfg.scope_breakers) {
          if (tokens[k].text == br) {
            broken = true;
            break;
          }
        }
      }
      if (!broken) return true;
    }
  }
  return false;
}

struct Evidence {
  std::string keyword;
  std::size_t begin = 0;  // byte span into the report text
  std::size_t end = 0;
  bool negated = false;

  bool operator==(const Evidence&) const = default;
};

// present[p] holds iff evidence[p] contains at least one un-negated match.
struct PathologyLabels {
  std::array<bool, kNumPathologies> present{};
  std::array<std::vector<Evidence>, kNumPathologies> evidence;

  bool operator[](Pathology p) const { return present[index_of(p)]; }
  bool any() const {
    for (bool b : present) {
      if (b) return true;
    }
    return false;
  }
};

inline PathologyLabels extract_labels(std::string_view text, const std::vector<Token>& tokens,
                                      const KeywordTable& table = KeywordTable::defaults(),
                                      const NegationConfig& negation = {}) {
  PathologyLabels labels;
  for (const auto& [s_begin, s_end] : split_sentences(text, tokens)) {
    for (Pathology p : kAllPathologies) {
      for (const auto& kw : table.keywords(p)) {
        for (std::size_t at = s_begin; at + kw.tokens.size() <= s_end; ++at) {
          if (!detail::tokens_match_at(tokens, at, kw.tokens)) continue;
          Evidence ev{kw.text, tokens[at].begin, tokens[at + kw.tokens.size() - 1].end,
                      is_negated(at, s_begin, tokens, negation)};
          if (!ev.negated) labels.present[index_of(p)] = true;
          labels.evidence[index_of(p)].push_back(std::move(ev));
        }
      }
    }
  }
  return labels;
}

inline PathologyLabels extract_labels(const ReportRecord& record,
                                      const KeywordTable& table = KeywordTable::defaults(),
                                      const NegationConfig& negation = {}) {
  return extract_labels(record.raw_text(), record.tokens(), table, negation);
}

struct HealthConfig {
  std::vector<std::string> phrases = {"show no obvious abnormality", "show no active lesion"};
};

// True iff the normalized conclusion contains a normalized health phrase.
inline bool is_healthy_report(const ReportRecord& record, const HealthConfig& cfg = {}) {
  const std::string conclusion = normalize_text(record.conclusion());
  for (const auto& phrase : cfg.phrases) {
    const std::string needle = normalize_text(phrase);
    if (!needle.empty() && conclusion.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace ctalign
