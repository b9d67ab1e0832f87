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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bcae/model.hpp"
#include "json.hpp"

namespace bcae {

/// "BCAC" v1: model id, spec digest, original extents, code shape and one
/// binary16 payload per wedge.
struct CodeFile {
  std::string model_id;
  std::uint64_t spec_digest = 0;
  Shape original_extents;
  Shape code_shape;
  std::vector<std::vector<Half>> payloads;

  std::size_t size() const { return payloads.size(); }
  Code code(std::size_t i) const;
  /// Empty `codes` yields an empty file stamped with `model`.
  static CodeFile from_codes(const BcaeModel& model, std::span<const Code> codes);
};

inline constexpr std::uint8_t kCodeFileVersion = 1;

void write_codes(std::ostream& out, const CodeFile& file);
CodeFile read_codes(std::istream& in);
void write_code_file(const std::filesystem::path& path, const CodeFile& file);
CodeFile read_code_file(const std::filesystem::path& path);

/// Thread count from BCAE_NUM_THREADS, else the hardware concurrency.
std::size_t default_threads();

/// Encodes every wedge (padding as needed); output order matches input.
std::vector<Code> compress(const BcaeModel& model, std::span<const LogWedge> wedges,
                           Precision precision, std::size_t threads = 1);

/// Decodes every code; checks the model id and spec digest first.
std::vector<Reconstruction> decompress(const BcaeModel& model, const CodeFile& codes,
                                       std::optional<double> threshold = std::nullopt,
                                       std::size_t threads = 1);

struct BenchConfig {
  Precision precision = Precision::kFull32;
  std::size_t batch = 1;
  std::size_t warmup = 2;
  std::size_t iters = 10;
  std::size_t threads = 1;
  /// Also time both decoders.
  bool full_pipeline = false;
};

inline constexpr std::size_t kMinTimedIters = 10;

struct BenchReport {
  std::string model_id;
  std::string variant;
  Precision precision = Precision::kFull32;
  std::size_t batch = 1;
  std::size_t warmup = 0;
  std::size_t iters = 0;
  std::size_t threads = 1;
  bool full_pipeline = false;
  double wedges_per_second_mean = 0.0;
  double wedges_per_second_std = 0.0;
  std::size_t encoder_parameters = 0;
  std::size_t decoder_parameters = 0;

  nlohmann::json to_json() const;
};

/// Times encoder forward passes over `batch` memory-resident wedges per
/// iteration. Throws ConfigError when iters < kMinTimedIters.
BenchReport bench(const BcaeModel& model, std::span<const LogWedge> wedges,
                  const BenchConfig& config);

}  // namespace bcae
