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

// Desk-scale end-to-end run of the joint objective
//
//   L = L_contrastive + lambda_dist * L_distill
//
// on synthetic paired features with linear encoders and plain gradient
// descent. Class 0 plays the "healthy" role: with duplicate_text set its
// reports share fixed content, which is where false-negative correction
// matters.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ctalign/embed.hpp"
#include "ctalign/error.hpp"
#include "ctalign/losses.hpp"
#include "ctalign/retrieval.hpp"
#include "ctalign/rng.hpp"
#include "json.hpp"

namespace ctalign::toy {

inline constexpr std::size_t kHealthyClass = 0;

struct SyntheticConfig {
  std::size_t classes = 4;
  std::size_t samples = 200;
  std::size_t image_dim = 32;
  std::size_t text_dim = 32;
  double noise = 0.5;
  std::uint64_t seed = 0;
  // Healthy-class text rows share the class prototype instead of carrying
  // per-sample content.
  bool duplicate_text = false;
  // Std of per-sample jitter added to shared healthy texts (rephrasings of
  // the same finding). 0 keeps the rows byte-identical.
  double healthy_text_jitter = 0.0;
  // Share of samples in the healthy class; 0 means balanced (1/classes).
  double healthy_fraction = 0.0;

  void validate() const {
    if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (samples < classes) throw ConfigError("synthetic data needs samples >= classes");
    if (image_dim == 0 || text_dim == 0) throw ConfigError("feature dims must be positive");
    if (!(noise >= 0.0) || !(healthy_text_jitter >= 0.0)) throw ConfigError("noise must be >= 0");
    if (!(healthy_fraction >= 0.0 && healthy_fraction < 1.0)) {
      throw ConfigError("healthy_fraction must be in [0, 1)");
    }
  }
};

// Data setting for the RoCo vs InfoNCE ablation: many healthy samples whose
// texts are near-duplicates of one template, so InfoNCE sees them as hard
// negatives of each other.
inline SyntheticConfig ablation_data_preset() {
  SyntheticConfig cfg;
  cfg.noise = 1.0;
  cfg.duplicate_text = true;
  cfg.healthy_text_jitter = 1.0;
  cfg.healthy_fraction = 0.5;
  return cfg;
}

struct SyntheticDataset {
  SyntheticConfig config;
  Matrix image_features;  // n x p
  Matrix text_features;   // n x q
  Matrix image_prototypes;  // k x p
  Matrix text_prototypes;   // k x q
  std::vector<std::size_t> class_of;

  std::size_t size() const { return class_of.size(); }
};

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Xoshiro256& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

// Class of sample i. Balanced: i mod k. Otherwise healthy samples are spread
// evenly at the requested share and the rest cycle through classes 1..k-1.
inline std::vector<std::size_t> assign_classes(const SyntheticConfig& cfg) {
  std::vector<std::size_t> out(cfg.samples);
  if (cfg.healthy_fraction == 0.0) {
    for (std::size_t i = 0; i < cfg.samples; ++i) out[i] = i % cfg.classes;
    return out;
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const auto lo = static_cast<std::size_t>(std::floor(static_cast<double>(i) * cfg.healthy_fraction));
    const auto hi = static_cast<std::size_t>(std::floor(static_cast<double>(i + 1) * cfg.healthy_fraction));
    out[i] = hi > lo ? kHealthyClass : 1 + (next++ % (cfg.classes - 1));
  }
  return out;
}

// Image and text of a sample share one
// latent perturbation, so non-healthy pairs are identifiable; healthy texts
// under duplicate_text carry no sample-specific signal.
inline SyntheticDataset make_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Xoshiro256 rng(cfg.seed);
  SyntheticDataset ds;
  ds.config = cfg;
  ds.image_prototypes = gaussian_matrix(cfg.classes, cfg.image_dim, 1.0, rng);
  ds.text_prototypes = gaussian_matrix(cfg.classes, cfg.text_dim, 1.0, rng);
  const Matrix mixing = gaussian_matrix(cfg.text_dim, cfg.image_dim,
                                        1.0 / std::sqrt(static_cast<double>(cfg.image_dim)), rng);

  const std::size_t n = cfg.samples;
  ds.image_features = Matrix(n, cfg.image_dim);
  ds.text_features = Matrix(n, cfg.text_dim);
  ds.class_of = assign_classes(cfg);
  std::vector<double> latent(cfg.image_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = ds.class_of[i];
    for (auto& e : latent) e = rng.normal();
    for (std::size_t j = 0; j < cfg.image_dim; ++j) {
      ds.image_features(i, j) = ds.image_prototypes(c, j) + cfg.noise * latent[j];
    }
    const bool shared = cfg.duplicate_text && c == kHealthyClass;
    for (std::size_t j = 0; j < cfg.text_dim; ++j) {
      const double perturb = shared ? 0.0 : cfg.noise * dot(mixing.row(j), latent);
      ds.text_features(i, j) = ds.text_prototypes(c, j) + perturb;
    }
  }
  if (cfg.duplicate_text && cfg.healthy_text_jitter > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (ds.class_of[i] != kHealthyClass) continue;
      for (std::size_t j = 0; j < cfg.text_dim; ++j) {
        ds.text_features(i, j) += cfg.healthy_text_jitter * rng.normal();
      }
    }
  }
  return ds;
}

// Frozen stand-in expert: a seeded random linear map of the noise-free class
// prototype of every sample.
inline EmbeddingMatrix make_teacher(const SyntheticDataset& ds, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("teacher dim must be positive");
  Xoshiro256 rng(seed ^ 0x7465616368657200ULL);
  const std::size_t p = ds.image_prototypes.cols();
  const Matrix w = gaussian_matrix(dim, p, 1.0 / std::sqrt(static_cast<double>(p)), rng);
  Matrix out(ds.size(), dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto proto = ds.image_prototypes.row(ds.class_of[i]);
    for (std::size_t r = 0; r < dim; ++r) out(i, r) = dot(w.row(r), proto);
  }
  return EmbeddingMatrix(std::move(out));
}

// Semantic groups used for positives and grouped recall: all healthy samples
// form one group; other samples group by byte-identical text rows.
inline std::vector<std::size_t> semantic_groups(const SyntheticDataset& ds) {
  std::vector<std::size_t> group(ds.size());
  std::map<std::vector<double>, std::size_t> by_text;
  std::size_t next = 1;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.class_of[i] == kHealthyClass) {
      group[i] = 0;
      continue;
    }
    const auto row = ds.text_features.row(i);
    auto [it, inserted] = by_text.try_emplace(std::vector<double>(row.begin(), row.end()), next);
    if (inserted) ++next;
    group[i] = it->second;
  }
  return group;
}

class LinearEncoder {
 public:
  LinearEncoder() = default;
  LinearEncoder(std::size_t out_dim, std::size_t in_dim, Xoshiro256& rng)
      : weight_(gaussian_matrix(out_dim, in_dim, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng)),
        bias_(out_dim, 0.0) {}

  const Matrix& weight() const { return weight_; }
  const std::vector<double>& bias() const { return bias_; }
  std::size_t out_dim() const { return weight_.rows(); }

  Matrix forward(const Matrix& x) const {
    if (x.cols() != weight_.cols()) throw DimensionMismatchError("encoder input dim mismatch");
    Matrix y(x.rows(), weight_.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t r = 0; r < weight_.rows(); ++r) y(i, r) = dot(weight_.row(r), x.row(i)) + bias_[r];
    }
    return y;
  }

  // Plain gradient step given dL/dy for the batch x.
  void step(const Matrix& x, const Matrix& grad_y, double lr) {
    for (std::size_t r = 0; r < weight_.rows(); ++r) {
      auto w = weight_.row(r);
      double gb = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double g = grad_y(i, r);
        if (g == 0.0) continue;
        gb += g;
        const auto xi = x.row(i);
        for (std::size_t c = 0; c < w.size(); ++c) w[c] -= lr * g * xi[c];
      }
      bias_[r] -= lr * gb;
    }
  }

 private:
  Matrix weight_;
  std::vector<double> bias_;
};

struct TrainConfig {
  std::size_t epochs = 60;
  double learning_rate = 0.05;
  std::size_t batch_size = 50;
  double temperature = 0.07;
  double lambda_dist = 1.0;
  std::size_t embed_dim = 16;
  std::uint64_t seed = 0;
  bool use_roco = true;
  bool use_distill = true;
  bool symmetric = false;
  Reduction distill_reduction = Reduction::kMean;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(lambda_dist >= 0.0)) throw ConfigError("lambda_dist must be >= 0");
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  }
};

struct EpochLoss {
  std::size_t epoch = 0;  // 0 = before training
  double total = 0.0;
  double contrastive = 0.0;
  double distill = 0.0;
};

struct TrainResult {
  LinearEncoder image_encoder;
  LinearEncoder text_encoder;
  std::vector<EpochLoss> trace;  // full-dataset losses after every epoch
  double recall_before = 0.0;
  double recall_after = 0.0;
  double relation_distance_before = 0.0;
  double relation_distance_after = 0.0;
};

// Top-1 image->text retrieval counting any text of the query's semantic
// group as correct.
inline double grouped_recall_at_1(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                                  const std::vector<std::size_t>& group) {
  const auto hits = retrieve(img, txt, 1);
  std::size_t correct = 0;
  for (const auto& h : hits) correct += group[h.query_index] == group[h.matched_index] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(hits.size());
}

namespace detail {

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy(m.row(idx[k]).begin(), m.row(idx[k]).end(), out.row(k).begin());
  }
  return out;
}

inline PositiveSetMap batch_positives(std::span<const std::size_t> idx,
                                      const std::vector<std::size_t>& group, bool use_roco) {
  if (!use_roco) return PositiveSetMap::singletons(idx.size());
  std::vector<std::size_t> g(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) g[k] = group[idx[k]];
  return PositiveSetMap::from_groups(g);
}

struct Objective {
  double contrastive = 0.0;
  double distill = 0.0;
  Matrix grad_img;
  Matrix grad_txt;
};

inline Objective evaluate(const Matrix& img, const Matrix& txt, const Matrix& teacher,
                          const PositiveSetMap& positives, const TrainConfig& cfg) {
  const EmbeddingMatrix img_e(img), txt_e(txt);
  auto c = roco_loss(img_e, txt_e, positives, RocoOptions{cfg.temperature, cfg.symmetric});
  Objective out{c.value, 0.0, std::move(c.gradients[0]), std::move(c.gradients[1])};
  if (cfg.use_distill && cfg.lambda_dist > 0.0) {
    const auto d = distill_loss(img_e, EmbeddingMatrix(teacher), cfg.distill_reduction);
    out.distill = d.value;
    for (std::size_t k = 0; k < out.grad_img.data().size(); ++k) {
      out.grad_img.data()[k] += cfg.lambda_dist * d.gradients[0].data()[k];
    }
  }
  return out;
}

}  // namespace detail

inline EmbeddingMatrix encode(const LinearEncoder& enc, const Matrix& x) {
  return EmbeddingMatrix(enc.forward(x));
}

inline TrainResult train(const SyntheticDataset& ds, const EmbeddingMatrix& teacher,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (teacher.rows() != ds.size() || teacher.dim() != cfg.embed_dim) {
    throw DimensionMismatchError("teacher must be n x embed_dim");
  }
  Xoshiro256 rng(cfg.seed);
  TrainResult res;
  res.image_encoder = LinearEncoder(cfg.embed_dim, ds.image_features.cols(), rng);
  res.text_encoder = LinearEncoder(cfg.embed_dim, ds.text_features.cols(), rng);

  const auto group = semantic_groups(ds);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  const auto full_positives = detail::batch_positives(all, group, cfg.use_roco);
  const auto teacher_rel = relation_matrix(teacher);

  auto record = [&](std::size_t epoch) {
    const Matrix img = res.image_encoder.forward(ds.image_features);
    const Matrix txt = res.text_encoder.forward(ds.text_features);
    const auto obj = detail::evaluate(img, txt, teacher.values(), full_positives, cfg);
    EpochLoss e{epoch, obj.contrastive + cfg.lambda_dist * obj.distill, obj.contrastive, obj.distill};
    if (!std::isfinite(e.total)) {
      throw DivergenceError("loss is not finite after epoch " + std::to_string(epoch) +
                            " (contrastive=" + std::to_string(obj.contrastive) +
                            ", distill=" + std::to_string(obj.distill) + ")");
    }
    res.trace.push_back(e);
  };

  auto snapshot = [&](double& recall, double& rel_dist) {
    const auto img = encode(res.image_encoder, ds.image_features);
    const auto txt = encode(res.text_encoder, ds.text_features);
    recall = grouped_recall_at_1(img, txt, group);
    rel_dist = relation_distance(relation_matrix(img), teacher_rel);
  };

  snapshot(res.recall_before, res.relation_distance_before);
  record(0);
  std::vector<std::size_t> order = all;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix x_img = detail::select_rows(ds.image_features, idx);
      const Matrix x_txt = detail::select_rows(ds.text_features, idx);
      const auto obj = detail::evaluate(res.image_encoder.forward(x_img), res.text_encoder.forward(x_txt),
                                        detail::select_rows(teacher.values(), idx),
                                        detail::batch_positives(idx, group, cfg.use_roco), cfg);
      res.image_encoder.step(x_img, obj.grad_img, cfg.learning_rate);
      res.text_encoder.step(x_txt, obj.grad_txt, cfg.learning_rate);
    }
    record(epoch);
  }
  snapshot(res.recall_after, res.relation_distance_after);
  return res;
}

struct AblationRow {
  std::uint64_t seed = 0;
  double recall_roco = 0.0;
  double recall_infonce = 0.0;
};

// Trains the same data and initialization with and without false-negative
// correction, once per seed (seed drives both data and training).
inline std::vector<AblationRow> run_ablation(SyntheticConfig data, TrainConfig cfg,
                                             const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (auto s : seeds) {
    data.seed = s;
    cfg.seed = s;
    const auto ds = make_synthetic(data);
    const auto teacher = make_teacher(ds, cfg.embed_dim, s);
    AblationRow row{s, 0.0, 0.0};
    cfg.use_roco = true;
    row.recall_roco = train(ds, teacher, cfg).recall_after;
    cfg.use_roco = false;
    row.recall_infonce = train(ds, teacher, cfg).recall_after;
    rows.push_back(row);
  }
  return rows;
}

// Everything train-toy needs, loadable from a JSON object. Missing keys keep
// their defaults; unknown keys are rejected so typos do not pass silently.
struct ToyRunConfig {
  SyntheticConfig data = ablation_data_preset();
  TrainConfig train;
  std::vector<std::uint64_t> ablation_seeds = {0, 1, 2, 3, 4};

  nlohmann::json to_json() const {
    return {{"data",
             {{"classes", data.classes},
              {"samples", data.samples},
              {"image_dim", data.image_dim},
              {"text_dim", data.text_dim},
              {"noise", data.noise},
              {"seed", data.seed},
              {"duplicate_text", data.duplicate_text},
              {"healthy_text_jitter", data.healthy_text_jitter},
              {"healthy_fraction", data.healthy_fraction}}},
            {"train",
             {{"epochs", train.epochs},
              {"learning_rate", train.learning_rate},
              {"batch_size", train.batch_size},
              {"temperature", train.temperature},
              {"lambda_dist", train.lambda_dist},
              {"embed_dim", train.embed_dim},
              {"seed", train.seed},
              {"use_roco", train.use_roco},
              {"use_distill", train.use_distill},
              {"symmetric", train.symmetric},
              {"distill_reduction", train.distill_reduction == Reduction::kSum ? "sum" : "mean"}}},
            {"ablation_seeds", ablation_seeds}};
  }

  static ToyRunConfig from_json(const nlohmann::json& j) {
    ToyRunConfig c;
    if (!j.is_object()) throw ConfigError("toy config must be an object");
    auto take = [](const nlohmann::json& obj, const char* section, auto&& fields) {
      if (!obj.is_object()) throw ConfigError(std::string(section) + " must be an object");
      for (const auto& [key, value] : obj.items()) {
        if (!fields(key, value)) throw ConfigError("unknown key " + std::string(section) + "." + key);
      }
    };
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "data") {
          take(value, "data", [&](const std::string& k, const nlohmann::json& v) {
            auto& d = c.data;
            if (k == "classes") d.classes = v.get<std::size_t>();
            else if (k == "samples") d.samples = v.get<std::size_t>();
            else if (k == "image_dim") d.image_dim = v.get<std::size_t>();
            else if (k == "text_dim") d.text_dim = v.get<std::size_t>();
            else if (k == "noise") d.noise = v.get<double>();
            else if (k == "seed") d.seed = v.get<std::uint64_t>();
            else if (k == "duplicate_text") d.duplicate_text = v.get<bool>();
            else if (k == "healthy_text_jitter") d.healthy_text_jitter = v.get<double>();
            else if (k == "healthy_fraction") d.healthy_fraction = v.get<double>();
            else return false;
            return true;
          });
        } else if (key == "train") {
          take(value, "train", [&](const std::string& k, const nlohmann::json& v) {
            auto& t = c.train;
            if (k == "epochs") t.epochs = v.get<std::size_t>();
            else if (k == "learning_rate") t.learning_rate = v.get<double>();
            else if (k == "batch_size") t.batch_size = v.get<std::size_t>();
            else if (k == "temperature") t.temperature = v.get<double>();
            else if (k == "lambda_dist") t.lambda_dist = v.get<double>();
            else if (k == "embed_dim") t.embed_dim = v.get<std::size_t>();
            else if (k == "seed") t.seed = v.get<std::uint64_t>();
            else if (k == "use_roco") t.use_roco = v.get<bool>();
            else if (k == "use_distill") t.use_distill = v.get<bool>();
            else if (k == "symmetric") t.symmetric = v.get<bool>();
            else if (k == "distill_reduction") {
              const auto r = v.get<std::string>();
              if (r != "sum" && r != "mean") throw ConfigError("distill_reduction must be sum or mean");
              t.distill_reduction = r == "sum" ? Reduction::kSum : Reduction::kMean;
            } else {
              return false;
            }
            return true;
          });
        } else if (key == "ablation_seeds") {
          c.ablation_seeds = value.get<std::vector<std::uint64_t>>();
        } else {
          throw ConfigError("unknown key " + key);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("toy config: ") + e.what());
    }
    c.data.validate();
    c.train.validate();
    return c;
  }
};

}  // namespace ctalign::toy
