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

// Dense embedding matrices, cosine kernels, relation matrices, the EMB1
// binary format and Hounsfield-unit windowing.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctalign/error.hpp"

namespace ctalign {

// Mutable row-major matrix of doubles. Used for gradients, encoder weights
// and as the builder for EmbeddingMatrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionMismatchError("matrix data length " +
                                   std::to_string(data_.size()) + " != " +
                                   std::to_string(rows_) + "x" +
                                   std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// m x d matrix of finite reals. Immutable after construction. When the
// normalized flag is set every row has unit L2 norm (within 1e-6).
class EmbeddingMatrix {
 public:
  static constexpr double kNormTolerance = 1e-6;

  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> data,
                  bool normalized = false)
      : EmbeddingMatrix(Matrix(rows, dim, std::move(data)), normalized) {}

  explicit EmbeddingMatrix(Matrix values, bool normalized = false)
      : values_(std::move(values)), normalized_(normalized) {
    if (values_.rows() == 0 || values_.cols() == 0) {
      throw DimensionMismatchError("embedding matrix must have at least one row and one column");
    }
    for (std::size_t k = 0; k < values_.data().size(); ++k) {
      if (!std::isfinite(values_.data()[k])) {
        throw ConfigError("non-finite value in embedding matrix at row " +
                          std::to_string(k / values_.cols()));
      }
    }
    if (normalized_) {
      for (std::size_t i = 0; i < values_.rows(); ++i) {
        if (std::abs(l2_norm(values_.row(i)) - 1.0) > kNormTolerance) {
          throw ConfigError("row " + std::to_string(i) +
                            " is not unit norm but matrix is flagged normalized");
        }
      }
    }
  }

  // Builds from nested rows, e.g. {{1, 0}, {0, 1}}.
  static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                   bool normalized = false) {
    if (rows.empty()) {
      throw DimensionMismatchError("embedding matrix must have at least one row and one column");
    }
    const std::size_t dim = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * dim);
    for (const auto& r : rows) {
      if (r.size() != dim) throw DimensionMismatchError("ragged rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return EmbeddingMatrix(rows.size(), dim, std::move(data), normalized);
  }

  std::size_t rows() const { return values_.rows(); }
  std::size_t dim() const { return values_.cols(); }
  bool normalized() const { return normalized_; }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const { return values_; }
  const std::vector<double>& data() const { return values_.data(); }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  Matrix values_;
  bool normalized_ = false;
};

// Throws DegenerateInputError naming the first zero row.
inline std::vector<double> row_norms(const EmbeddingMatrix& e, const char* what = "matrix") {
  std::vector<double> norms(e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    norms[i] = l2_norm(e.row(i));
    if (norms[i] == 0.0) {
      throw DegenerateInputError(std::string("zero row ") + std::to_string(i) +
                                 " in " + what);
    }
  }
  return norms;
}

// Returns a copy with every row scaled to unit norm and the flag set.
inline EmbeddingMatrix normalize_rows(const EmbeddingMatrix& e) {
  const auto norms = row_norms(e);
  Matrix out(e.rows(), e.dim());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = 0; j < e.dim(); ++j) out(i, j) = e(i, j) / norms[i];
  }
  return EmbeddingMatrix(std::move(out), true);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatchError("cosine_similarity: dims " + std::to_string(a.size()) +
                                 " and " + std::to_string(b.size()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero-norm input");
  }
  return dot(a, b) / (na * nb);
}

// Symmetric m x m cosine matrix with an exact unit diagonal.
class RelationMatrix {
 public:
  static constexpr double kTolerance = 1e-6;

  explicit RelationMatrix(Matrix values) : values_(std::move(values)) {
    const std::size_t m = values_.rows();
    if (values_.cols() != m) throw DimensionMismatchError("relation matrix must be square");
    for (std::size_t i = 0; i < m; ++i) {
      if (std::abs(values_(i, i) - 1.0) > kTolerance) {
        throw ConfigError("relation matrix diagonal entry " + std::to_string(i) + " != 1");
      }
      for (std::size_t j = 0; j < m; ++j) {
        const double v = values_(i, j);
        if (!(v >= -1.0 - kTolerance && v <= 1.0 + kTolerance)) {
          throw ConfigError("relation matrix entry out of [-1, 1]");
        }
        if (std::abs(v - values_(j, i)) > kTolerance) {
          throw ConfigError("relation matrix is not symmetric");
        }
      }
    }
  }

  std::size_t size() const { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

inline RelationMatrix relation_matrix(const EmbeddingMatrix& e) {
  const auto norms = row_norms(e);
  const std::size_t m = e.rows();
  Matrix p(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    p(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double c = dot(e.row(i), e.row(j)) / (norms[i] * norms[j]);
      p(i, j) = c;
      p(j, i) = c;
    }
  }
  return RelationMatrix(std::move(p));
}

// Frobenius norm of the difference of two relation matrices.
inline double relation_distance(const RelationMatrix& a, const RelationMatrix& b) {
  if (a.size() != b.size()) throw DimensionMismatchError("relation matrices differ in size");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values().data().size(); ++k) {
    const double d = a.values().data()[k] - b.values().data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// --- Hounsfield-unit preprocessing ----------------------------------------

class HUWindow {
 public:
  constexpr HUWindow() = default;
  HUWindow(double low, double high) : low_(low), high_(high) {
    if (!(low < high)) throw ConfigError("HU window requires low < high");
  }
  constexpr double low() const { return low_; }
  constexpr double high() const { return high_; }

 private:
  double low_ = -1150.0;
  double high_ = 350.0;
};

// Clamp to the window, then map affinely onto [-1, 1].
inline double hu_normalize(double value, const HUWindow& w = {}) {
  const double v = std::clamp(value, w.low(), w.high());
  return 2.0 * (v - w.low()) / (w.high() - w.low()) - 1.0;
}

inline void hu_normalize(std::span<float> voxels, const HUWindow& w = {}) {
  for (auto& v : voxels) v = static_cast<float>(hu_normalize(v, w));
}

// --- EMB1 binary format ----------------------------------------------------
//
//   "EMB1" | u32 rows | u32 dim | rows*dim f32 (row-major) | u8 flags
//
// All integers and floats little-endian. Flag bit 0 = normalized.

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in[at + k]) << (8 * k);
  return v;
}

}  // namespace detail

inline constexpr std::array<std::uint8_t, 4> kEmbeddingMagic = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmbeddingHeaderSize = 12;

inline std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& e) {
  std::vector<std::uint8_t> out(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  out.reserve(kEmbeddingHeaderSize + 4 * e.data().size() + 1);
  detail::put_u32(out, static_cast<std::uint32_t>(e.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(e.dim()));
  for (double v : e.data()) {
    detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  out.push_back(e.normalized() ? 1 : 0);
  return out;
}

inline EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes) {
  using Kind = ParseError::Kind;
  if (bytes.size() < kEmbeddingMagic.size() ||
      !std::equal(kEmbeddingMagic.begin(), kEmbeddingMagic.end(), bytes.begin())) {
    throw ParseError(Kind::kBadMagic, 0, "bad magic, expected \"EMB1\"");
  }
  if (bytes.size() < kEmbeddingHeaderSize) {
    throw ParseError(Kind::kTruncated, bytes.size(), "truncated header");
  }
  const std::uint32_t rows = detail::get_u32(bytes, 4);
  const std::uint32_t dim = detail::get_u32(bytes, 8);
  if (rows == 0 || dim == 0) {
    throw ParseError(Kind::kSizeMismatch, 4, "header declares an empty matrix");
  }
  const std::uint64_t count = std::uint64_t{rows} * dim;
  const std::uint64_t expected = kEmbeddingHeaderSize + 4 * count + 1;
  if (bytes.size() < expected) {
    throw ParseError(Kind::kTruncated, bytes.size(),
                     "truncated payload: header declares " + std::to_string(rows) + "x" +
                         std::to_string(dim) + " (" + std::to_string(expected) +
                         " bytes), file has " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw ParseError(Kind::kSizeMismatch, expected,
                     "trailing bytes after payload: header declares " + std::to_string(rows) +
                         "x" + std::to_string(dim));
  }
  std::vector<double> data(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t at = kEmbeddingHeaderSize + 4 * k;
    const float f = std::bit_cast<float>(detail::get_u32(bytes, at));
    if (!std::isfinite(f)) throw ParseError(Kind::kInvalidValue, at, "non-finite value");
    data[k] = f;
  }
  const std::size_t flag_at = expected - 1;
  const std::uint8_t flags = bytes[flag_at];
  if (flags > 1) throw ParseError(Kind::kInvalidValue, flag_at, "unknown flag bits");
  try {
    return EmbeddingMatrix(rows, dim, std::move(data), flags & 1);
  } catch (const ConfigError& err) {
    throw ParseError(Kind::kInvalidValue, flag_at, err.what());
  }
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::kIo, 0, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline EmbeddingMatrix read_embeddings(const std::string& path) {
  return decode_embeddings(read_file_bytes(path));
}

inline void write_embeddings(const EmbeddingMatrix& e, const std::string& path) {
  const auto bytes = encode_embeddings(e);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(ParseError::Kind::kIo, 0, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError(ParseError::Kind::kIo, 0, "write failed for " + path);
}

}  // namespace ctalign
