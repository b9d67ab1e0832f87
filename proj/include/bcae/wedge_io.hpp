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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "bcae/wedge.hpp"

namespace bcae {

/// "TPCW" files: magic, u8 version, u32 count, u32 extents[3], u8 dtype,
/// then every wedge row-major. Little-endian throughout.
enum class WedgeDtype : std::uint8_t { kAdc16 = 0, kLogF32 = 1 };

inline constexpr std::uint8_t kWedgeFileVersion = 1;

struct WedgeFile {
  Shape extents;
  WedgeDtype dtype = WedgeDtype::kAdc16;
  std::vector<RawWedge> raw;  // filled for kAdc16
  std::vector<LogWedge> log;  // filled for kLogF32

  std::size_t size() const { return dtype == WedgeDtype::kAdc16 ? raw.size() : log.size(); }
  /// Log-ADC view; raw wedges are log-transformed.
  std::vector<LogWedge> log_wedges() const;
};

/// An empty list needs `extents` to fill the header.
void write_wedges(std::ostream& out, std::span<const RawWedge> wedges,
                  const Shape& extents = {});
/// Padded wedges are clipped before writing.
void write_wedges(std::ostream& out, std::span<const LogWedge> wedges,
                  const Shape& extents = {});
WedgeFile read_wedges(std::istream& in);

void write_wedge_file(const std::filesystem::path& path,
                      std::span<const RawWedge> wedges, const Shape& extents = {});
void write_wedge_file(const std::filesystem::path& path,
                      std::span<const LogWedge> wedges, const Shape& extents = {});
WedgeFile read_wedge_file(const std::filesystem::path& path);

}  // namespace bcae
