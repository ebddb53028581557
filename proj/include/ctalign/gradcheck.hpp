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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>

#include "ctalign/embed.hpp"
#include "ctalign/error.hpp"
#include "ctalign/losses.hpp"
#include "ctalign/rng.hpp"

namespace ctalign::toy {

struct GradcheckOptions {
  std::size_t rows = 8;
  std::size_t cols = 16;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double temperature = 0.07;
  // Entries whose analytic and numeric magnitudes are both below this are
  // compared in absolute terms.
  double floor = 1e-6;
};

struct GradcheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
};

// |a - n| / max(|a|, |n|, floor), maximised over entries.
inline void accumulate_error(double analytic, double numeric, double floor, GradcheckReport& r) {
  const double abs_err = std::abs(analytic - numeric);
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
  r.max_relative_error = std::max(r.max_relative_error, abs_err / scale);
  ++r.entries;
}

// Central differences of `f` around `x`, compared with `analytic`.
inline void check_against_fd(const Matrix& x, const Matrix& analytic,
                             const std::function<double(const Matrix&)>& f,
                             const GradcheckOptions& opt, GradcheckReport& r) {
  Matrix probe = x;
  for (std::size_t k = 0; k < x.data().size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + opt.step;
    const double up = f(probe);
    probe.data()[k] = orig - opt.step;
    const double down = f(probe);
    probe.data()[k] = orig;
    accumulate_error(analytic.data()[k], (up - down) / (2.0 * opt.step), opt.floor, r);
  }
}

// Analytic vs finite-difference gradients on seeded N(0, 1) inputs.
// loss_name: "roco" (random group positives), "infonce" or "distill"
// (student gradient; the teacher is frozen).
inline GradcheckReport gradcheck(std::string_view loss_name, const GradcheckOptions& opt = {}) {
  Xoshiro256 rng(opt.seed);
  auto random_matrix = [&] {
    Matrix m(opt.rows, opt.cols);
    for (auto& v : m.data()) v = rng.normal();
    return m;
  };
  const Matrix a = random_matrix();
  const Matrix b = random_matrix();
  GradcheckReport report;

  if (loss_name == "roco" || loss_name == "infonce") {
    PositiveSetMap positives = PositiveSetMap::singletons(opt.rows);
    if (loss_name == "roco") {
      std::vector<std::size_t> group(opt.rows);
      for (auto& g : group) g = rng.below(std::max<std::size_t>(1, opt.rows / 2));
      positives = PositiveSetMap::from_groups(group);
    }
    const RocoOptions ro{opt.temperature, false};
    const auto loss = roco_loss(EmbeddingMatrix(a), EmbeddingMatrix(b), positives, ro);
    check_against_fd(a, loss.gradients[0], [&](const Matrix& x) {
      return roco_loss(EmbeddingMatrix(x), EmbeddingMatrix(b), positives, ro).value;
    }, opt, report);
    check_against_fd(b, loss.gradients[1], [&](const Matrix& x) {
      return roco_loss(EmbeddingMatrix(a), EmbeddingMatrix(x), positives, ro).value;
    }, opt, report);
  } else if (loss_name == "distill") {
    const auto loss = distill_loss(EmbeddingMatrix(a), EmbeddingMatrix(b));
    check_against_fd(a, loss.gradients[0], [&](const Matrix& x) {
      return distill_loss(EmbeddingMatrix(x), EmbeddingMatrix(b)).value;
    }, opt, report);
  } else {
    throw ConfigError("gradcheck: unknown loss \"" + std::string(loss_name) +
                      "\" (expected roco, infonce or distill)");
  }
  return report;
}

}  // namespace ctalign::toy
