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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctalign {

// Base class for every error raised by the library. The CLI maps these to
// exit code 2 (data error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A zero vector (or zero row) where a direction is required.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Operand shapes disagree (row counts, dimensions, batch sizes).
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter or configuration value (temperature, rates, templates).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Index or span outside its container.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed binary payload. Carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  enum class Kind { kBadMagic, kTruncated, kSizeMismatch, kInvalidValue, kIo };

  ParseError(Kind kind, std::size_t offset, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

// Malformed line-oriented text input. Carries the 1-based line number.
class LineError : public Error {
 public:
  LineError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id, std::size_t line = 0)
      : Error((line ? "line " + std::to_string(line) + ": " : std::string()) +
              "duplicate record id \"" + id + "\""),
        id_(id),
        line_(line) {}

  const std::string& id() const { return id_; }
  // 1-based line of the second occurrence, 0 when not read from a file.
  std::size_t line() const { return line_; }

 private:
  std::string id_;
  std::size_t line_;
};

// Loss became NaN/Inf during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctalign
