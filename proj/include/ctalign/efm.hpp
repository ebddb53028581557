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

// Entity-focused masking. A phrase is a maximal run of entity/attribute
// tokens containing at least one entity token ("solid nodule"); phrases are
// masked whole or not at all so that no attribute leaks the masked entity.
// Remaining tokens are masked at a lower random rate, then the plan is cut
// back to the budget ceil(max_mask_fraction * n).
//
// Randomness comes from Xoshiro256 seeded with the plan seed. Draw order:
// one uniform per phrase (left to right), then one uniform per non-phrase
// token (left to right). A draw u selects when u < rate.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctalign/error.hpp"
#include "ctalign/rng.hpp"
#include "json.hpp"

namespace ctalign {

class PhraseLexicon {
 public:
  PhraseLexicon(std::set<std::string> entities, std::set<std::string> attributes,
                bool size_pattern = true)
      : entities_(std::move(entities)), attributes_(std::move(attributes)), size_pattern_(size_pattern) {
    if (entities_.empty()) throw ConfigError("phrase lexicon has no entity words");
    for (const auto* set : {&entities_, &attributes_}) {
      for (const auto& w : *set) {
        if (w.empty()) throw ConfigError("phrase lexicon contains an empty word");
        for (char c : w) {
          if (c >= 'A' && c <= 'Z') throw ConfigError("phrase lexicon word not lowercase: " + w);
        }
      }
    }
  }

  static const PhraseLexicon& defaults() {
    static const PhraseLexicon lex(
        {"nodule", "nodules", "nodular", "opacity", "opacities", "effusion", "emphysema",
         "inflammation", "pneumonia", "infection", "calcification", "calcifications",
         "infiltrate", "infiltration", "reticulation", "scar", "consolidation", "atelectasis",
         "mass", "lesion", "lesions", "bulla", "bullae", "thickening"},
        {// locations
         "left", "right", "upper", "lower", "middle", "lobe", "lung", "lungs", "bilateral",
         "apical", "basal", "pleural", "subpleural",
         // textures
         "solid", "ground", "glass", "part", "patchy", "cystic", "calcified", "spiculated"});
    return lex;
  }

  // {"entities": [...], "attributes": [...], "size_pattern": true}
  static PhraseLexicon from_json(const nlohmann::json& j) {
    auto words = [&](const char* key) {
      std::set<std::string> out;
      if (!j.contains(key)) return out;
      for (const auto& w : j.at(key)) out.insert(w.get<std::string>());
      return out;
    };
    return PhraseLexicon(words("entities"), words("attributes"), j.value("size_pattern", true));
  }

  static PhraseLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("lexicon " + path + ": " + e.what());
    }
  }

  bool is_entity(std::string_view w) const { return entities_.contains(std::string(w)); }
  bool is_attribute(std::string_view w) const {
    return attributes_.contains(std::string(w)) || (size_pattern_ && is_size_token(w));
  }
  bool is_phrase_word(std::string_view w) const { return is_entity(w) || is_attribute(w); }

  // Number followed by a length unit: "5mm", "12cm".
  static bool is_size_token(std::string_view w) {
    std::size_t i = 0;
    while (i < w.size() && std::isdigit(static_cast<unsigned char>(w[i]))) ++i;
    if (i == 0) return false;
    const auto unit = w.substr(i);
    return unit == "mm" || unit == "cm";
  }

  const std::set<std::string>& entities() const { return entities_; }
  const std::set<std::string>& attributes() const { return attributes_; }

 private:
  std::set<std::string> entities_;
  std::set<std::string> attributes_;
  bool size_pattern_;
};

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenSpan&) const = default;
};

inline std::vector<TokenSpan> find_phrases(const std::vector<std::string>& tokens,
                                           const PhraseLexicon& lex = PhraseLexicon::defaults()) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!lex.is_phrase_word(tokens[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool has_entity = false;
    while (j < tokens.size() && lex.is_phrase_word(tokens[j])) {
      has_entity = has_entity || lex.is_entity(tokens[j]);
      ++j;
    }
    if (has_entity) out.push_back({i, j});
    i = j;
  }
  return out;
}

struct MaskRates {
  double entity_rate = 0.5;
  double random_rate = 0.15;
  double max_mask_fraction = 0.30;

  void validate() const {
    if (!(entity_rate >= 0.0 && entity_rate <= 1.0)) throw ConfigError("entity_rate must be in [0, 1]");
    if (!(random_rate >= 0.0 && random_rate <= 1.0)) throw ConfigError("random_rate must be in [0, 1]");
    if (!(max_mask_fraction > 0.0 && max_mask_fraction <= 1.0)) {
      throw ConfigError("max_mask_fraction must be in (0, 1]");
    }
  }
};

enum class MaskTag { kEntityPhrase, kRandom };

inline std::string_view tag_name(MaskTag t) {
  return t == MaskTag::kEntityPhrase ? "entity_phrase" : "random";
}

struct MaskedSpan {
  TokenSpan span;
  MaskTag tag = MaskTag::kRandom;

  bool operator==(const MaskedSpan&) const = default;
};

struct MaskPlan {
  std::vector<MaskedSpan> spans;  // sorted, non-overlapping
  std::uint64_t seed = 0;
  MaskRates rates;
  std::size_t token_count = 0;

  std::size_t masked_count() const {
    std::size_t n = 0;
    for (const auto& s : spans) n += s.span.size();
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json spans_json = nlohmann::json::array();
    for (const auto& s : spans) {
      spans_json.push_back({{"begin", s.span.begin}, {"end", s.span.end}, {"tag", tag_name(s.tag)}});
    }
    return {{"seed", seed},
            {"entity_rate", rates.entity_rate},
            {"random_rate", rates.random_rate},
            {"max_mask_fraction", rates.max_mask_fraction},
            {"token_count", token_count},
            {"spans", spans_json}};
  }
};

// ceil(fraction * n), robust to representation error such as 0.3 * 10.
inline std::size_t mask_budget(double max_mask_fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(max_mask_fraction * static_cast<double>(n) - 1e-9));
}

inline MaskPlan plan_mask(const std::vector<std::string>& tokens,
                          const PhraseLexicon& lex = PhraseLexicon::defaults(),
                          const MaskRates& rates = {}, std::uint64_t seed = 0) {
  rates.validate();
  Xoshiro256 rng(seed);
  const auto phrases = find_phrases(tokens, lex);

  std::vector<bool> in_phrase(tokens.size(), false);
  for (const auto& p : phrases) {
    for (std::size_t k = p.begin; k < p.end; ++k) in_phrase[k] = true;
  }

  std::vector<MaskedSpan> chosen;
  for (const auto& p : phrases) {
    if (rng.uniform() < rates.entity_rate) chosen.push_back({p, MaskTag::kEntityPhrase});
  }
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (in_phrase[k]) continue;
    if (rng.uniform() < rates.random_rate) chosen.push_back({{k, k + 1}, MaskTag::kRandom});
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const MaskedSpan& a, const MaskedSpan& b) { return a.span.begin < b.span.begin; });

  MaskPlan plan{std::move(chosen), seed, rates, tokens.size()};
  const std::size_t budget = mask_budget(rates.max_mask_fraction, tokens.size());
  std::size_t masked = plan.masked_count();
  for (MaskTag drop : {MaskTag::kRandom, MaskTag::kEntityPhrase}) {
    for (std::size_t k = plan.spans.size(); k-- > 0 && masked > budget;) {
      if (plan.spans[k].tag != drop) continue;
      masked -= plan.spans[k].span.size();
      plan.spans.erase(plan.spans.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return plan;
}

inline std::vector<std::string> apply_mask(const std::vector<std::string>& tokens, const MaskPlan& plan,
                                           std::string_view mask_symbol = "[MASK]") {
  std::vector<std::string> out = tokens;
  for (const auto& s : plan.spans) {
    if (s.span.begin > s.span.end || s.span.end > tokens.size()) {
      throw RangeError("mask span [" + std::to_string(s.span.begin) + ", " +
                       std::to_string(s.span.end) + ") out of range for " +
                       std::to_string(tokens.size()) + " tokens");
    }
    for (std::size_t k = s.span.begin; k < s.span.end; ++k) out[k] = mask_symbol;
  }
  return out;
}

}  // namespace ctalign
