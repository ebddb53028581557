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

#include <cmath>
#include <numbers>

#include "ctalign/gradcheck.hpp"
#include "ctalign/losses.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ctalign {
namespace {

using Sets = std::vector<std::vector<std::size_t>>;

EmbeddingMatrix em(std::size_t r, std::size_t c, std::vector<double> v) { return EmbeddingMatrix(r, c, std::move(v)); }

// -log softmax written out directly for small instances.
double roco_reference(const EmbeddingMatrix& img, const EmbeddingMatrix& txt, const Sets& p, double t) {
  const std::size_t n = img.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      denom += std::exp(oracle::cosine(oracle::row_of(img, i), oracle::row_of(txt, k)) / t);
    }
    double term = 0.0;
    for (std::size_t j : p[i]) {
      term += std::log(std::exp(oracle::cosine(oracle::row_of(img, i), oracle::row_of(txt, j)) / t) / denom);
    }
    total += term / static_cast<double>(p[i].size());
  }
  return -total / static_cast<double>(n);
}

TEST(Roco, Examples) {
  const auto same = em(2, 2, {1, 0, 1, 0});
  for (const Sets& s : {Sets{{0}, {1}}, Sets{{0, 1}, {0, 1}}, Sets{{0, 1}, {1}}}) {
    EXPECT_NEAR(roco_loss(same, same, PositiveSetMap(s)).value, std::numbers::ln2, 1e-6);
  }
  const auto eye = em(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(roco_loss(eye, eye, PositiveSetMap::singletons(2), 1.0).value, 0.313262, 1e-6);
  EXPECT_NEAR(roco_loss(eye, eye, PositiveSetMap::singletons(2), 1.0).value,
              -std::log(std::numbers::e / (std::numbers::e + 1)), 1e-15);
  const auto one = em(1, 3, {0.2, -1, 4});
  EXPECT_EQ(roco_loss(one, em(1, 3, {5, 5, 5}), PositiveSetMap::singletons(1)).value, 0.0);
}

TEST(Roco, MatchesDirectEvaluation) {
  Xoshiro256 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(6);
    const EmbeddingMatrix a(oracle::random_matrix(n, d, rng)), b(oracle::random_matrix(n, d, rng));
    std::vector<std::size_t> group(n);
    for (auto& g : group) g = rng.below(3);
    const auto p = PositiveSetMap::from_groups(group);
    const double t = 0.2 + rng.uniform();
    EXPECT_NEAR(roco_loss(a, b, p, t).value, roco_reference(a, b, p.sets(), t), 1e-12);
  }
}

TEST(Roco, Errors) {
  const auto a = em(2, 2, {1, 0, 0, 1});
  const auto p = PositiveSetMap::singletons(2);
  EXPECT_THROW(roco_loss(a, a, p, 0.0), ConfigError);
  EXPECT_THROW(roco_loss(a, a, p, -1.0), ConfigError);
  EXPECT_THROW(roco_loss(a, em(3, 2, {1, 0, 0, 1, 1, 1}), p), DimensionMismatchError);
  EXPECT_THROW(roco_loss(a, em(2, 3, {1, 0, 0, 0, 1, 0}), p), DimensionMismatchError);
  EXPECT_THROW(roco_loss(a, a, PositiveSetMap::singletons(3)), DimensionMismatchError);
  EXPECT_THROW(roco_loss(a, em(2, 2, {1, 0, 0, 0}), p), DegenerateInputError);
}

TEST(Roco, InfoNceIsSingletonRoco) {
  Xoshiro256 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(10), d = 1 + rng.below(10);
    const EmbeddingMatrix a(oracle::random_matrix(n, d, rng)), b(oracle::random_matrix(n, d, rng));
    const auto x = infonce_loss(a, b, 0.07);
    const auto y = roco_loss(a, b, PositiveSetMap::singletons(n), 0.07);
    EXPECT_EQ(x.value, y.value);
    EXPECT_EQ(x.gradients[0], y.gradients[0]);
    EXPECT_EQ(x.gradients[1], y.gradients[1]);
  }
}

TEST(Roco, NonNegativeAndStableAtLowTemperature) {
  Xoshiro256 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(10), d = 1 + rng.below(10);
    const EmbeddingMatrix a(oracle::random_matrix(n, d, rng)), b(oracle::random_matrix(n, d, rng));
    std::vector<std::size_t> group(n);
    for (auto& g : group) g = rng.below(4);
    for (double t : {0.001, 0.01, 0.07, 1.0, 10.0}) {
      const auto l = roco_loss(a, b, PositiveSetMap::from_groups(group), RocoOptions{t, trial % 2 == 0});
      EXPECT_GE(l.value, 0.0);
      EXPECT_TRUE(std::isfinite(l.value));
      for (const auto& g : l.gradients) {
        for (double v : g.data()) ASSERT_TRUE(std::isfinite(v));
      }
    }
  }
}

TEST(Roco, EnlargingPositivesAtSharedMaximumDoesNotIncreaseLoss) {
  // Texts 0 and 1 both coincide with image 0; text 2 is orthogonal.
  const auto img = em(3, 2, {1, 0, 1, 0, 0, 1});
  const auto txt = em(3, 2, {1, 0, 2, 0, 0, 1});
  const double narrow = roco_loss(img, txt, PositiveSetMap(Sets{{0}, {1}, {2}}), 0.1).value;
  const double wide = roco_loss(img, txt, PositiveSetMap(Sets{{0, 1}, {0, 1}, {2}}), 0.1).value;
  EXPECT_LE(wide, narrow + 1e-15);

  // InfoNCE penalises the duplicate as a negative; RoCo does not.
  const auto dup = em(2, 2, {1, 0, 1, 0});
  const double infonce = infonce_loss(dup, dup, 0.1).value;
  const double roco = roco_loss(dup, dup, PositiveSetMap(Sets{{0, 1}, {0, 1}}), 0.1).value;
  EXPECT_NEAR(infonce, std::numbers::ln2, 1e-12);
  EXPECT_NEAR(roco, std::numbers::ln2, 1e-12);
}

TEST(Roco, SymmetricAveragesBothDirections) {
  Xoshiro256 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(6), d = 2 + rng.below(6);
    const EmbeddingMatrix a(oracle::random_matrix(n, d, rng)), b(oracle::random_matrix(n, d, rng));
    std::vector<std::size_t> group(n);
    for (auto& g : group) g = rng.below(3);
    const auto p = PositiveSetMap::from_groups(group);
    const double sym = roco_loss(a, b, p, RocoOptions{0.3, true}).value;
    const double i2t = roco_reference(a, b, p.sets(), 0.3);
    const double t2i = roco_reference(b, a, p.sets(), 0.3);
    EXPECT_NEAR(sym, 0.5 * (i2t + t2i), 1e-12);
  }
}

TEST(Roco, RotationAndScaleInvariant) {
  Xoshiro256 rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(8), d = 2 + rng.below(8);
    const Matrix a = oracle::random_matrix(n, d, rng), b = oracle::random_matrix(n, d, rng);
    const Matrix q = oracle::random_orthonormal(d, rng);
    std::vector<std::size_t> group(n);
    for (auto& g : group) g = rng.below(3);
    const auto p = PositiveSetMap::from_groups(group);
    const double base = roco_loss(EmbeddingMatrix(a), EmbeddingMatrix(b), p).value;
    EXPECT_NEAR(roco_loss(EmbeddingMatrix(oracle::matmul(a, q)), EmbeddingMatrix(oracle::matmul(b, q)), p).value,
                base, 1e-6);
    EXPECT_NEAR(roco_loss(EmbeddingMatrix(oracle::scale_rows(a, rng)), EmbeddingMatrix(oracle::scale_rows(b, rng)), p)
                    .value,
                base, 1e-6);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  for (const char* name : {"roco", "infonce", "distill"}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      toy::GradcheckOptions opt;
      opt.seed = seed;
      const auto r = toy::gradcheck(name, opt);
      EXPECT_LT(r.max_relative_error, 1e-4) << name << " seed " << seed;
      EXPECT_EQ(r.entries, std::string(name) == "distill" ? 128u : 256u);
    }
  }
  EXPECT_THROW(toy::gradcheck("mse"), ConfigError);
}

TEST(Gradients, SymmetricAndMeanVariants) {
  Xoshiro256 rng(18);
  const Matrix a = oracle::random_matrix(6, 5, rng), b = oracle::random_matrix(6, 5, rng);
  const auto p = PositiveSetMap::from_groups(std::vector<std::size_t>{0, 1, 0, 2, 1, 0});
  const RocoOptions opt{0.2, true};
  const auto l = roco_loss(EmbeddingMatrix(a), EmbeddingMatrix(b), p, opt);
  toy::GradcheckOptions fd;
  toy::GradcheckReport report;
  toy::check_against_fd(a, l.gradients[0], [&](const Matrix& x) {
    return roco_loss(EmbeddingMatrix(x), EmbeddingMatrix(b), p, opt).value;
  }, fd, report);
  toy::check_against_fd(b, l.gradients[1], [&](const Matrix& x) {
    return roco_loss(EmbeddingMatrix(a), EmbeddingMatrix(x), p, opt).value;
  }, fd, report);
  const auto d = distill_loss(EmbeddingMatrix(a), EmbeddingMatrix(b), Reduction::kMean);
  toy::check_against_fd(a, d.gradients[0], [&](const Matrix& x) {
    return distill_loss(EmbeddingMatrix(x), EmbeddingMatrix(b), Reduction::kMean).value;
  }, fd, report);
  EXPECT_LT(report.max_relative_error, 1e-4);
}

TEST(Distill, Examples) {
  Xoshiro256 rng(19);
  const EmbeddingMatrix h(oracle::random_matrix(4, 3, rng));
  const auto zero = distill_loss(h, h);
  EXPECT_EQ(zero.value, 0.0);
  for (double v : zero.gradients[0].data()) EXPECT_EQ(v, 0.0);

  const auto one = distill_loss(em(1, 2, {1, 0}), em(1, 2, {0, 1}));
  EXPECT_EQ(one.pairwise, 2.0);
  EXPECT_EQ(one.relation, 0.0);
  EXPECT_EQ(one.value, 2.0);

  const auto two = distill_loss(em(2, 2, {1, 0, 0, 1}), em(2, 2, {1, 0, 1, 0}), Reduction::kSum);
  EXPECT_EQ(two.pairwise, 2.0);
  EXPECT_EQ(two.relation, 2.0);
  EXPECT_EQ(two.value, 4.0);

  const auto mean = distill_loss(em(2, 2, {1, 0, 0, 1}), em(2, 2, {1, 0, 1, 0}), Reduction::kMean);
  EXPECT_EQ(mean.pairwise, 0.5);
  EXPECT_EQ(mean.relation, 0.5);
  EXPECT_EQ(mean.value, 1.0);
}

TEST(Distill, TeacherGradientIsZeroAndShapesMatch) {
  Xoshiro256 rng(20);
  const EmbeddingMatrix s(oracle::random_matrix(5, 3, rng)), t(oracle::random_matrix(5, 3, rng));
  const auto l = distill_loss(s, t);
  EXPECT_GT(l.value, 0.0);
  ASSERT_EQ(l.gradients[0].rows(), 5u);
  ASSERT_EQ(l.gradients[0].cols(), 3u);
  ASSERT_EQ(l.gradients[1].rows(), 5u);
  for (double v : l.gradients[1].data()) EXPECT_EQ(v, 0.0);
}

TEST(Distill, ErrorsAndInvariance) {
  EXPECT_THROW(distill_loss(em(2, 2, {1, 0, 0, 1}), em(1, 2, {1, 0})), DimensionMismatchError);
  EXPECT_THROW(distill_loss(em(1, 2, {0, 0}), em(1, 2, {1, 0})), DegenerateInputError);
  Xoshiro256 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + rng.below(8), d = 2 + rng.below(8);
    const Matrix s = oracle::random_matrix(m, d, rng), t = oracle::random_matrix(m, d, rng);
    const Matrix q = oracle::random_orthonormal(d, rng);
    const double base = distill_loss(EmbeddingMatrix(s), EmbeddingMatrix(t)).value;
    const double rot = distill_loss(EmbeddingMatrix(oracle::matmul(s, q)), EmbeddingMatrix(oracle::matmul(t, q))).value;
    EXPECT_NEAR(base, rot, 1e-6);
    EXPECT_GE(base, 0.0);
  }
}

TEST(PositiveSets, Validation) {
  EXPECT_THROW(PositiveSetMap(Sets{{0, 2}, {1}}), RangeError);
  EXPECT_THROW(PositiveSetMap(Sets{{1}, {1}}), ConfigError);
  const PositiveSetMap p(Sets{{1, 0, 1}, {1}});
  EXPECT_EQ(p[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(p.contains(0, 1));
  EXPECT_FALSE(p.contains(1, 0));
}

TEST(PositiveSets, Json) {
  const auto p = PositiveSetMap::from_json(nlohmann::json::parse("[[0,1],[0,1],[2]]"));
  EXPECT_EQ(PositiveSetMap::from_json(p.to_json()), p);
  EXPECT_EQ(p.to_json()["n"], 3);
  EXPECT_THROW(PositiveSetMap::from_json(nlohmann::json::parse("[[0],[-1,1]]")), ConfigError);
  EXPECT_THROW(PositiveSetMap::from_json(nlohmann::json::parse("[0, 1]")), ConfigError);
  EXPECT_THROW(PositiveSetMap::load("/nonexistent/p.json"), Error);
}

TEST(PositiveSets, RuleExamples) {
  std::vector<ReportRecord> batch = {ReportRecord("a", "Both lungs show no obvious abnormality."),
                                     ReportRecord("b", "The chest CT show no obvious abnormality"),
                                     ReportRecord("c", "Nodule in the right lower lobe.")};
  auto p = build_positive_sets(batch);
  EXPECT_EQ(p.sets(), (Sets{{0, 1}, {0, 1}, {2}}));

  batch = {ReportRecord("a", "Nodule size is 5mm."), ReportRecord("b", "Nodule size is 6mm.")};
  EXPECT_EQ(build_positive_sets(batch).sets(), (Sets{{0}, {1}}));

  batch = {ReportRecord("a", "Nodule size is 5mm."), ReportRecord("b", " nodule  SIZE is 5mm")};
  EXPECT_EQ(build_positive_sets(batch).sets(), (Sets{{0, 1}, {0, 1}}));

  EXPECT_EQ(build_positive_sets(std::vector<ReportRecord>{}).size(), 0u);
}

TEST(PositiveSets, HandDerivedFixture) {
  const auto corpus = load_corpus(fixtures::path("false_negative_reports.jsonl"));
  const auto expected = PositiveSetMap::load(fixtures::path("false_negative_expected.json"));
  const auto got = build_positive_sets(corpus);
  EXPECT_EQ(got, expected);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_TRUE(got.contains(i, i));
    for (std::size_t j : got[i]) EXPECT_TRUE(got.contains(j, i));
  }
}

}  // namespace
}  // namespace ctalign
