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

// Evaluation: per-pathology precision/recall/F1 over labeler output, and the
// report-generation text metrics BLEU-4, ROUGE-L, CIDEr-D and an exact-match
// METEOR.
//
// Every 0/0 ratio evaluates to 0 and is flagged, never silently skipped.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctalign/corpus.hpp"
#include "ctalign/error.hpp"
#include "ctalign/labeler.hpp"

namespace ctalign {

using Tokens = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Classification metrics

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct ConfusionCounts {
  std::array<Confusion, kNumPathologies> per_entity{};

  Confusion& operator[](Pathology p) { return per_entity[index_of(p)]; }
  const Confusion& operator[](Pathology p) const { return per_entity[index_of(p)]; }

  void add(const PathologyLabels& predicted, const PathologyLabels& truth) {
    for (std::size_t p = 0; p < kNumPathologies; ++p) {
      auto& c = per_entity[p];
      const bool pr = predicted.present[p];
      const bool gt = truth.present[p];
      if (pr && gt) ++c.tp;
      else if (pr) ++c.fp;
      else if (gt) ++c.fn;
      else ++c.tn;
    }
  }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding ratio was 0/0 and defaulted to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  bool any_undefined() const { return precision_undefined || recall_undefined || f1_undefined; }
};

struct PrfReport {
  std::array<Prf, kNumPathologies> per_entity{};
  Prf macro;  // unweighted mean over the six entities
};

inline Prf prf1(const Confusion& c) {
  Prf out;
  auto ratio = [](double num, double den, bool& undefined) {
    if (den == 0.0) {
      undefined = true;
      return 0.0;
    }
    return num / den;
  };
  out.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp), out.precision_undefined);
  out.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), out.recall_undefined);
  out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall, out.f1_undefined);
  return out;
}

inline PrfReport prf1(const ConfusionCounts& counts) {
  PrfReport r;
  for (std::size_t p = 0; p < kNumPathologies; ++p) {
    r.per_entity[p] = prf1(counts.per_entity[p]);
    r.macro.precision += r.per_entity[p].precision / kNumPathologies;
    r.macro.recall += r.per_entity[p].recall / kNumPathologies;
    r.macro.f1 += r.per_entity[p].f1 / kNumPathologies;
    r.macro.precision_undefined |= r.per_entity[p].precision_undefined;
    r.macro.recall_undefined |= r.per_entity[p].recall_undefined;
    r.macro.f1_undefined |= r.per_entity[p].f1_undefined;
  }
  return r;
}

struct ReportEvaluation {
  ConfusionCounts counts;
  PrfReport scores;
};

namespace detail {

// Throws listing ids present on one side only.
inline void check_aligned(const Corpus& generated, const Corpus& reference) {
  std::vector<std::string> missing_gen, missing_ref;
  for (const auto& r : reference) {
    if (!generated.position(r.id())) missing_gen.push_back(r.id());
  }
  for (const auto& g : generated) {
    if (!reference.position(g.id())) missing_ref.push_back(g.id());
  }
  if (missing_gen.empty() && missing_ref.empty()) return;
  std::string msg = "corpora are not aligned by id;";
  auto list = [&](const char* what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    msg += std::string(" missing from ") + what + ":";
    for (const auto& id : ids) msg += " " + id;
    msg += ";";
  };
  list("generated", missing_gen);
  list("reference", missing_ref);
  msg.pop_back();
  throw DimensionMismatchError(msg);
}

}  // namespace detail

// Labels both sides of every report pair; reference labels are the truth.
inline ReportEvaluation eval_reports(const Corpus& generated, const Corpus& reference,
                                     const KeywordTable& table = KeywordTable::defaults(),
                                     const NegationConfig& negation = {}) {
  detail::check_aligned(generated, reference);
  ReportEvaluation out;
  for (const auto& ref : reference) {
    const auto& gen = generated[*generated.position(ref.id())];
    out.counts.add(extract_labels(gen, table, negation), extract_labels(ref, table, negation));
  }
  out.scores = prf1(out.counts);
  return out;
}

// ---------------------------------------------------------------------------
// Text generation metrics

namespace detail {

// n-grams joined with U+001F, which the word tokenizer never emits.
inline std::map<std::string, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::string, std::size_t> out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string key = t[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += t[i + k];
    }
    ++out[key];
  }
  return out;
}

}  // namespace detail

// Sentence BLEU-4, uniform weights, no smoothing. Any zero n-gram precision
// (including a candidate shorter than 4 tokens) yields 0.
inline double bleu4(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = detail::ngram_counts(candidate, n);
    const auto ref = detail::ngram_counts(reference, n);
    std::size_t clipped = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      const auto it = ref.find(g);
      if (it != ref.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += 0.25 * std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS F-measure. 2PR/(P+R) with P = L/|c|, R = L/|r| simplifies to
// 2L/(|c|+|r|), which is what is evaluated.
inline double rouge_l(const Tokens& candidate, const Tokens& reference) {
  const std::size_t lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  return 2.0 * static_cast<double>(lcs) / static_cast<double>(candidate.size() + reference.size());
}

// Document frequencies of 1..4-grams over a reference collection, one
// document per reference report.
class CiderStats {
 public:
  explicit CiderStats(const std::vector<Tokens>& documents) : num_documents_(documents.size()) {
    for (const auto& doc : documents) {
      for (std::size_t n = 1; n <= 4; ++n) {
        for (const auto& [g, c] : detail::ngram_counts(doc, n)) ++df_[g];
      }
    }
  }

  std::size_t num_documents() const { return num_documents_; }
  // idf-style degenerate when fewer than two documents.
  bool degenerate() const { return num_documents_ < 2; }

  std::size_t document_frequency(const std::string& ngram) const {
    const auto it = df_.find(ngram);
    return it == df_.end() ? 0 : it->second;
  }

  double log_num_documents() const {
    return std::log(static_cast<double>(std::max<std::size_t>(num_documents_, 1)));
  }

 private:
  std::size_t num_documents_;
  std::unordered_map<std::string, std::size_t> df_;
};

namespace detail {

struct TfIdf {
  std::array<std::map<std::string, double>, 4> vec;
  std::array<double, 4> norm{};
};

inline TfIdf tfidf(const Tokens& t, const CiderStats& stats) {
  TfIdf out;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& [g, c] : ngram_counts(t, n)) {
      const double df = std::log(std::max(1.0, static_cast<double>(stats.document_frequency(g))));
      const double w = static_cast<double>(c) * (stats.log_num_documents() - df);
      out.vec[n - 1][g] = w;
      out.norm[n - 1] += w * w;
    }
    out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
  }
  return out;
}

}  // namespace detail

// CIDEr-D: clipped tf-idf cosine per n-gram order with a Gaussian length
// penalty exp(-(|c|-|r|)^2 / (2 sigma^2)), averaged over orders and
// references, times 10.
inline double cider(const Tokens& candidate, const std::vector<Tokens>& references,
                    const CiderStats& stats, double sigma = 6.0) {
  if (references.empty()) return 0.0;
  const auto hyp = detail::tfidf(candidate, stats);
  double total = 0.0;
  for (const auto& ref_tokens : references) {
    const auto ref = detail::tfidf(ref_tokens, stats);
    const double delta = static_cast<double>(candidate.size()) - static_cast<double>(ref_tokens.size());
    const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
    for (std::size_t n = 0; n < 4; ++n) {
      double val = 0.0;
      for (const auto& [g, w] : hyp.vec[n]) {
        const auto it = ref.vec[n].find(g);
        if (it != ref.vec[n].end()) val += std::min(w, it->second) * it->second;
      }
      if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
      total += val * penalty;
    }
  }
  return 10.0 * total / 4.0 / static_cast<double>(references.size());
}

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  bool exact = true;  // false when the search hit its node limit
};

// Exact unigram alignment with the maximum number of matches and, among
// those, the fewest chunks. Branch-and-bound over candidate positions; the
// first branch tried always extends the current chunk.
inline MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference,
                                    std::size_t node_limit = 2'000'000) {
  std::map<std::string, std::vector<std::size_t>> ref_pos;
  for (std::size_t j = 0; j < reference.size(); ++j) ref_pos[reference[j]].push_back(j);
  std::map<std::string, std::size_t> cand_count;
  for (const auto& w : candidate) ++cand_count[w];

  std::map<std::string, std::size_t> need;
  std::size_t m = 0;
  for (const auto& [w, c] : cand_count) {
    const auto it = ref_pos.find(w);
    if (it == ref_pos.end()) continue;
    need[w] = std::min(c, it->second.size());
    m += need[w];
  }
  MeteorAlignment best{m, std::numeric_limits<std::size_t>::max(), true};
  if (m == 0) {
    best.chunks = 0;
    return best;
  }

  std::vector<bool> used(reference.size(), false);
  std::map<std::string, std::size_t> matched, remaining = cand_count;
  std::size_t nodes = 0;
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  auto search = [&](auto&& self, std::size_t i, std::size_t prev_ref, std::size_t matches,
                    std::size_t chunks) -> void {
    if (chunks >= best.chunks) return;
    if (++nodes > node_limit) {
      best.exact = false;
      return;
    }
    if (matches == m) {
      best.chunks = chunks;
      return;
    }
    if (i == candidate.size()) return;
    const auto& w = candidate[i];
    --remaining[w];
    const auto it = ref_pos.find(w);
    if (it != ref_pos.end() && matched[w] < need[w]) {
      auto try_ref = [&](std::size_t j) {
        used[j] = true;
        ++matched[w];
        const bool extends = prev_ref != kNone && j == prev_ref + 1;
        self(self, i + 1, j, matches + 1, chunks + (extends ? 0 : 1));
        --matched[w];
        used[j] = false;
      };
      if (prev_ref != kNone && prev_ref + 1 < reference.size() && !used[prev_ref + 1] &&
          reference[prev_ref + 1] == w) {
        try_ref(prev_ref + 1);
      }
      for (std::size_t j : it->second) {
        if (best.exact == false) break;
        if (used[j] || (prev_ref != kNone && j == prev_ref + 1)) continue;
        try_ref(j);
      }
    }
    // Leave candidate i unaligned if word w can still reach its quota.
    const bool can_skip = it == ref_pos.end() || matched[w] + remaining[w] >= need[w];
    if (can_skip && best.exact) self(self, i + 1, kNone, matches, chunks);
    ++remaining[w];
  };
  search(search, 0, kNone, 0, 0);
  return best;
}

// Fmean = 10PR/(R+9P), penalty = 0.5 (chunks/m)^3, score = Fmean (1 - penalty).
// With P = m/|c| and R = m/|r| this is 5 (2m^3 - chunks^3) / ((|c| + 9|r|) m^2);
// numerator and denominator are exact integers in double for any realistic
// report length, so the result is the correctly rounded score.
inline double meteor_score(const MeteorAlignment& a, std::size_t candidate_len,
                           std::size_t reference_len) {
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double ch = static_cast<double>(a.chunks);
  const double num = 5.0 * (2.0 * m * m * m - ch * ch * ch);
  const double den = (static_cast<double>(candidate_len) + 9.0 * static_cast<double>(reference_len)) * m * m;
  return num / den;
}

inline double meteor_simple(const Tokens& candidate, const Tokens& reference) {
  return meteor_score(meteor_align(candidate, reference), candidate.size(), reference.size());
}

struct NlpScores {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double meteor = 0.0;
  std::size_t pairs = 0;
  std::size_t empty_candidates = 0;  // scored 0 on every metric
  std::size_t inexact_meteor = 0;    // alignment search truncated
  bool cider_degenerate = false;     // fewer than 2 reference documents
};

// Mean sentence-level scores over id-aligned report pairs. CIDEr document
// frequencies come from the reference corpus.
inline NlpScores eval_nlp(const Corpus& generated, const Corpus& reference) {
  detail::check_aligned(generated, reference);
  NlpScores s;
  std::vector<Tokens> ref_docs;
  for (const auto& r : reference) ref_docs.push_back(token_texts(r.tokens()));
  const CiderStats stats(ref_docs);
  s.cider_degenerate = stats.degenerate();
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const auto cand = token_texts(generated[*generated.position(reference[k].id())].tokens());
    const auto& ref = ref_docs[k];
    if (cand.empty()) ++s.empty_candidates;
    s.bleu4 += bleu4(cand, ref);
    s.rouge_l += rouge_l(cand, ref);
    s.cider += cider(cand, {ref}, stats);
    const auto a = meteor_align(cand, ref);
    if (!a.exact) ++s.inexact_meteor;
    s.meteor += meteor_score(a, cand.size(), ref.size());
    ++s.pairs;
  }
  if (s.pairs > 0) {
    const double n = static_cast<double>(s.pairs);
    s.bleu4 /= n;
    s.rouge_l /= n;
    s.cider /= n;
    s.meteor /= n;
  }
  return s;
}

}  // namespace ctalign
