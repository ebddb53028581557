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

// Language-guided retrieval: for every query report embedding, the gallery
// row with the highest cosine similarity. Also prompt-based zero-shot
// classification over precomputed prompt embeddings.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctalign/embed.hpp"
#include "ctalign/error.hpp"

namespace ctalign {

struct ScoredIndex {
  std::size_t index = 0;
  double score = 0.0;

  bool operator==(const ScoredIndex&) const = default;
};

struct RetrievalResult {
  std::size_t query_index = 0;
  std::size_t matched_index = 0;
  double score = 0.0;
  // Best k gallery rows, score descending, ties by ascending index.
  std::vector<ScoredIndex> top_k;
};

// Exhaustive cosine retrieval. Exact ties resolve to the lowest gallery index.
inline std::vector<RetrievalResult> retrieve(const EmbeddingMatrix& queries,
                                             const EmbeddingMatrix& gallery, std::size_t k = 1) {
  if (queries.dim() != gallery.dim()) {
    throw DimensionMismatchError("retrieve: query dim " + std::to_string(queries.dim()) +
                                 " != gallery dim " + std::to_string(gallery.dim()));
  }
  if (gallery.rows() == 0) throw DimensionMismatchError("retrieve: empty gallery");
  if (k == 0) throw ConfigError("retrieve: k must be >= 1");
  const auto q_norms = row_norms(queries, "queries");
  const auto g_norms = row_norms(gallery, "gallery");
  const std::size_t keep = std::min(k, gallery.rows());
  auto better = [](const ScoredIndex& a, const ScoredIndex& b) {
    return a.score > b.score || (a.score == b.score && a.index < b.index);
  };

  std::vector<RetrievalResult> results(queries.rows());
  std::vector<ScoredIndex> scored(gallery.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto q = queries.row(i);
    for (std::size_t j = 0; j < gallery.rows(); ++j) {
      scored[j] = {j, dot(q, gallery.row(j)) / (q_norms[i] * g_norms[j])};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), better);
    auto& r = results[i];
    r.query_index = i;
    r.matched_index = scored.front().index;
    r.score = scored.front().score;
    r.top_k.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return results;
}

// Softmax over two logits cos/t, written as a logistic of the difference.
// p(a, b) + p(b, a) == 1 up to rounding and p(x, x) == 0.5 exactly.
inline double zero_shot_probability_from_cosines(double cos_positive, double cos_negative,
                                                 double temperature = 1.0) {
  if (!(temperature > 0.0)) throw ConfigError("zero-shot temperature must be > 0");
  const double z = (cos_positive - cos_negative) / temperature;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double zero_shot_probability(std::span<const double> image, std::span<const double> positive,
                                    std::span<const double> negative, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw ConfigError("zero-shot temperature must be > 0");
  return zero_shot_probability_from_cosines(cosine_similarity(image, positive),
                                            cosine_similarity(image, negative), temperature);
}

inline bool zero_shot_present(double probability) { return probability > 0.5; }

class PromptPair {
 public:
  static constexpr std::string_view kPlaceholder = "{}";
  static constexpr std::string_view kDefaultPositive = "this is a chest CT with {} in lung";
  static constexpr std::string_view kDefaultNegative = "this is a chest CT with no evident {} in lung";

  PromptPair() : PromptPair(std::string(kDefaultPositive), std::string(kDefaultNegative)) {}

  PromptPair(std::string positive_template, std::string negative_template)
      : positive_(std::move(positive_template)), negative_(std::move(negative_template)) {
    check(positive_, "positive");
    check(negative_, "negative");
  }

  const std::string& positive_template() const { return positive_; }
  const std::string& negative_template() const { return negative_; }

 private:
  static void check(const std::string& t, const char* which) {
    const auto first = t.find(kPlaceholder);
    if (first == std::string::npos) {
      throw ConfigError(std::string(which) + " prompt template has no \"{}\" placeholder");
    }
    if (t.find(kPlaceholder, first + kPlaceholder.size()) != std::string::npos) {
      throw ConfigError(std::string(which) + " prompt template has more than one \"{}\"");
    }
  }

  std::string positive_;
  std::string negative_;
};

struct RenderedPrompts {
  std::string positive;
  std::string negative;
  std::vector<std::string> warnings;
};

inline RenderedPrompts render_prompts(const PromptPair& pp, std::string_view entity) {
  auto fill = [&](const std::string& t) {
    std::string out = t;
    out.replace(out.find(PromptPair::kPlaceholder), PromptPair::kPlaceholder.size(), entity);
    return out;
  };
  RenderedPrompts r{fill(pp.positive_template()), fill(pp.negative_template()), {}};
  if (entity.empty()) r.warnings.push_back("empty entity: placeholder removed");
  return r;
}

}  // namespace ctalign
