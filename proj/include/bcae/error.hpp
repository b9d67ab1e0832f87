// Copyright 2026 The BCAE Codec Authors
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

namespace bcae {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with an operator's contract. `axis` names the
/// offending dimension (e.g. "channels", "spatial[1]").
class DimensionError : public Error {
 public:
  DimensionError(std::string op, std::string axis, std::size_t expected,
                 std::size_t actual, const std::string& hint = {})
      : Error(op + ": dimension mismatch on " + axis + " (expected " +
              std::to_string(expected) + ", got " + std::to_string(actual) +
              ")" + (hint.empty() ? std::string{} : "; " + hint)),
        op_(std::move(op)),
        axis_(std::move(axis)),
        expected_(expected),
        actual_(actual) {}

  const std::string& op() const noexcept { return op_; }
  const std::string& axis() const noexcept { return axis_; }
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::string op_;
  std::string axis_;
  std::size_t expected_;
  std::size_t actual_;
};

/// Illegal model, loss, generator or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or mismatched file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; `op` is the first operator that produced a non-finite
/// value.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string op)
      : Error(what), op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

}  // namespace bcae
