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

// Training objectives with analytic gradients:
//
//   * robust contrastive loss over cosine logits with per-sample positive
//     sets (InfoNCE is the all-singleton special case);
//   * dual distillation loss: squared residual between student and teacher
//     embeddings plus squared residual between their cosine relation
//     matrices.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctalign/corpus.hpp"
#include "ctalign/embed.hpp"
#include "ctalign/error.hpp"
#include "ctalign/labeler.hpp"
#include "json.hpp"

namespace ctalign {

// P_i for every sample i of a batch: sorted, duplicate-free, contains i.
class PositiveSetMap {
 public:
  explicit PositiveSetMap(std::vector<std::vector<std::size_t>> sets) : sets_(std::move(sets)) {
    const std::size_t n = sets_.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sets_[i];
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      if (!s.empty() && s.back() >= n) {
        throw RangeError("positive set " + std::to_string(i) + " has index " +
                         std::to_string(s.back()) + " outside batch of " + std::to_string(n));
      }
      if (!std::binary_search(s.begin(), s.end(), i)) {
        throw ConfigError("positive set " + std::to_string(i) + " does not contain its own index");
      }
    }
  }

  static PositiveSetMap singletons(std::size_t n) {
    std::vector<std::vector<std::size_t>> sets(n);
    for (std::size_t i = 0; i < n; ++i) sets[i] = {i};
    return PositiveSetMap(std::move(sets));
  }

  // Samples sharing a group id are mutually positive.
  static PositiveSetMap from_groups(std::span<const std::size_t> group_of) {
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < group_of.size(); ++i) members[group_of[i]].push_back(i);
    std::vector<std::vector<std::size_t>> sets(group_of.size());
    for (std::size_t i = 0; i < group_of.size(); ++i) sets[i] = members[group_of[i]];
    return PositiveSetMap(std::move(sets));
  }

  std::size_t size() const { return sets_.size(); }
  const std::vector<std::size_t>& operator[](std::size_t i) const { return sets_[i]; }
  const std::vector<std::vector<std::size_t>>& sets() const { return sets_; }
  bool contains(std::size_t i, std::size_t j) const {
    return std::binary_search(sets_[i].begin(), sets_[i].end(), j);
  }

  bool operator==(const PositiveSetMap&) const = default;

  // Accepts either [[0,1],[0,1],[2]] or {"sets": [[...], ...]}.
  static PositiveSetMap from_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() ? j.at("sets") : j;
    if (!arr.is_array()) throw ConfigError("positive sets must be a list of lists");
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& s : arr) {
      if (!s.is_array()) throw ConfigError("positive sets must be a list of lists");
      std::vector<std::size_t> set;
      for (const auto& v : s) {
        if (!v.is_number_unsigned()) throw ConfigError("positive set entries must be non-negative integers");
        set.push_back(v.get<std::size_t>());
      }
      sets.push_back(std::move(set));
    }
    return PositiveSetMap(std::move(sets));
  }

  nlohmann::json to_json() const { return {{"n", size()}, {"sets", sets_}}; }

  static PositiveSetMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open positive sets " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("positive sets " + path + ": " + e.what());
    }
  }

 private:
  std::vector<std::vector<std::size_t>> sets_;
};

// False-negative correction rules over a batch of reports:
//   1. all healthy reports are mutually positive;
//   2. two non-healthy reports are positive iff their normalized texts are
//      identical.
inline PositiveSetMap build_positive_sets(std::span<const ReportRecord> batch,
                                          const HealthConfig& health = {}) {
  const std::size_t n = batch.size();
  std::vector<std::size_t> group(n);
  std::map<std::string, std::size_t> text_group;
  constexpr std::size_t kHealthyGroup = 0;
  std::size_t next_group = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_healthy_report(batch[i], health)) {
      group[i] = kHealthyGroup;
      continue;
    }
    auto [it, inserted] = text_group.try_emplace(normalize_text(batch[i].raw_text()), next_group);
    if (inserted) ++next_group;
    group[i] = it->second;
  }
  return PositiveSetMap::from_groups(group);
}

inline PositiveSetMap build_positive_sets(const Corpus& corpus, const HealthConfig& health = {}) {
  return build_positive_sets(std::span<const ReportRecord>(corpus.records()), health);
}

// Loss value and the gradient with respect to each of the two inputs.
struct LossValue {
  double value = 0.0;
  std::array<Matrix, 2> gradients;
};

struct DistillLoss : LossValue {
  double pairwise = 0.0;
  double relation = 0.0;
};

enum class Reduction { kSum, kMean };

struct RocoOptions {
  double temperature = 0.07;
  // Average image->text and text->image terms (CLIP style). Off by default:
  // the objective is image->text only.
  bool symmetric = false;
};

namespace detail {

struct UnitRows {
  Matrix unit;
  std::vector<double> norms;
};

inline UnitRows unit_rows(const EmbeddingMatrix& e, const char* what) {
  UnitRows r{Matrix(e.rows(), e.dim()), row_norms(e, what)};
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = 0; j < e.dim(); ++j) r.unit(i, j) = e(i, j) / r.norms[i];
  }
  return r;
}

// Chain rule through x -> x / |x| for every row: (g - (g.u) u) / |x|.
inline Matrix backprop_normalize(const Matrix& grad_unit, const UnitRows& rows) {
  Matrix out(grad_unit.rows(), grad_unit.cols());
  for (std::size_t i = 0; i < grad_unit.rows(); ++i) {
    const auto g = grad_unit.row(i);
    const auto u = rows.unit.row(i);
    const double gu = dot(g, u);
    for (std::size_t j = 0; j < grad_unit.cols(); ++j) {
      out(i, j) = (g[j] - gu * u[j]) / rows.norms[i];
    }
  }
  return out;
}

// One softmax cross-entropy direction over the similarity matrix `sim`.
// Row r of the softmax runs over columns when `transpose` is false and over
// rows otherwise; positives[r] lists the target indices of row r. Adds
// `scale` times the loss to `value` and its derivative wrt sim to `grad`.
inline void softmax_xent(const Matrix& sim, const std::vector<std::vector<std::size_t>>& positives,
                         double temperature, bool transpose, double scale, double& value,
                         Matrix& grad) {
  const std::size_t n = sim.rows();
  auto at = [&](std::size_t r, std::size_t c) { return transpose ? sim(c, r) : sim(r, c); };
  std::vector<double> soft(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mx = at(r, 0) / temperature;
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, at(r, c) / temperature);
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) sum += std::exp(at(r, c) / temperature - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < n; ++c) soft[c] = std::exp(at(r, c) / temperature - lse);

    const auto& pos = positives[r];
    const double inv_pos = 1.0 / static_cast<double>(pos.size());
    double term = 0.0;
    for (std::size_t j : pos) term += lse - at(r, j) / temperature;
    value += scale * term * inv_pos / static_cast<double>(n);

    const double g_scale = scale / (static_cast<double>(n) * temperature);
    for (std::size_t c = 0; c < n; ++c) {
      double& g = transpose ? grad(c, r) : grad(r, c);
      g += g_scale * soft[c];
    }
    for (std::size_t j : pos) {
      double& g = transpose ? grad(j, r) : grad(r, j);
      g -= g_scale * inv_pos;
    }
  }
}

}  // namespace detail

// Robust contrastive loss
//
//   L = -(1/n) sum_i (1/|P_i|) sum_{j in P_i}
//         log( exp(cos(I_i, T_j)/t) / sum_k exp(cos(I_i, T_k)/t) )
//
// gradients[0] is dL/d(img), gradients[1] is dL/d(txt).
inline LossValue roco_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                           const PositiveSetMap& positives, const RocoOptions& opt = {}) {
  if (!(opt.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (img.rows() != txt.rows() || img.dim() != txt.dim()) {
    throw DimensionMismatchError("roco_loss: image " + std::to_string(img.rows()) + "x" +
                                 std::to_string(img.dim()) + " vs text " +
                                 std::to_string(txt.rows()) + "x" + std::to_string(txt.dim()));
  }
  if (positives.size() != img.rows()) {
    throw DimensionMismatchError("roco_loss: positive sets cover " +
                                 std::to_string(positives.size()) + " samples, batch has " +
                                 std::to_string(img.rows()));
  }
  const std::size_t n = img.rows();
  const auto u = detail::unit_rows(img, "image embeddings");
  const auto v = detail::unit_rows(txt, "text embeddings");

  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) sim(i, k) = dot(u.unit.row(i), v.unit.row(k));
  }

  LossValue out;
  Matrix g_sim(n, n);
  if (!opt.symmetric) {
    detail::softmax_xent(sim, positives.sets(), opt.temperature, false, 1.0, out.value, g_sim);
  } else {
    std::vector<std::vector<std::size_t>> text_positives(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j : positives[i]) text_positives[j].push_back(i);
    }
    detail::softmax_xent(sim, positives.sets(), opt.temperature, false, 0.5, out.value, g_sim);
    detail::softmax_xent(sim, text_positives, opt.temperature, true, 0.5, out.value, g_sim);
  }

  Matrix g_u(n, img.dim());
  Matrix g_v(n, txt.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double g = g_sim(i, k);
      if (g == 0.0) continue;
      const auto vk = v.unit.row(k);
      const auto ui = u.unit.row(i);
      auto gui = g_u.row(i);
      auto gvk = g_v.row(k);
      for (std::size_t d = 0; d < img.dim(); ++d) {
        gui[d] += g * vk[d];
        gvk[d] += g * ui[d];
      }
    }
  }
  out.gradients[0] = detail::backprop_normalize(g_u, u);
  out.gradients[1] = detail::backprop_normalize(g_v, v);
  return out;
}

inline LossValue roco_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                           const PositiveSetMap& positives, double temperature) {
  return roco_loss(img, txt, positives, RocoOptions{temperature, false});
}

// Standard InfoNCE: every sample's only positive is its own pair.
inline LossValue infonce_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                              const RocoOptions& opt = {}) {
  if (img.rows() != txt.rows()) {
    throw DimensionMismatchError("infonce_loss: batch sizes differ");
  }
  return roco_loss(img, txt, PositiveSetMap::singletons(img.rows()), opt);
}

inline LossValue infonce_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                              double temperature) {
  return infonce_loss(img, txt, RocoOptions{temperature, false});
}

// Dual distillation loss
//
//   L = R((h_s - h_t)^2) + R((rel(h_s) - rel(h_t))^2)
//
// with R a sum (default) or mean over entries and rel the cosine relation
// matrix. The teacher is frozen: gradients[1] is all zeros.
inline DistillLoss distill_loss(const EmbeddingMatrix& student, const EmbeddingMatrix& teacher,
                                Reduction reduction = Reduction::kSum) {
  if (student.rows() != teacher.rows() || student.dim() != teacher.dim()) {
    throw DimensionMismatchError("distill_loss: student " + std::to_string(student.rows()) + "x" +
                                 std::to_string(student.dim()) + " vs teacher " +
                                 std::to_string(teacher.rows()) + "x" +
                                 std::to_string(teacher.dim()));
  }
  const std::size_t m = student.rows();
  const std::size_t d = student.dim();
  const auto u = detail::unit_rows(student, "student embeddings");
  const auto t = detail::unit_rows(teacher, "teacher embeddings");
  const double pair_scale = reduction == Reduction::kMean ? 1.0 / static_cast<double>(m * d) : 1.0;
  const double rel_scale = reduction == Reduction::kMean ? 1.0 / static_cast<double>(m * m) : 1.0;

  DistillLoss out;
  Matrix grad(m, d);
  for (std::size_t k = 0; k < m * d; ++k) {
    const double r = student.data()[k] - teacher.data()[k];
    out.pairwise += r * r;
    grad.data()[k] = 2.0 * pair_scale * r;
  }
  out.pairwise *= pair_scale;

  // Diagonals are identically 1 on both sides and contribute nothing.
  Matrix g_unit(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double diff = dot(u.unit.row(i), u.unit.row(j)) - dot(t.unit.row(i), t.unit.row(j));
      out.relation += 2.0 * diff * diff;
      // (i, j) and (j, i) each contribute 2 * diff to dL/dp_ij.
      const double g = 4.0 * rel_scale * diff;
      const auto ui = u.unit.row(i);
      const auto uj = u.unit.row(j);
      auto gi = g_unit.row(i);
      auto gj = g_unit.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        gi[c] += g * uj[c];
        gj[c] += g * ui[c];
      }
    }
  }
  out.relation *= rel_scale;

  const Matrix g_rel = detail::backprop_normalize(g_unit, u);
  for (std::size_t k = 0; k < m * d; ++k) grad.data()[k] += g_rel.data()[k];

  out.value = out.pairwise + out.relation;
  out.gradients[0] = std::move(grad);
  out.gradients[1] = Matrix(m, d);
  return out;
}

}  // namespace ctalign
