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

#include "bcae/wedge_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "bcae/error.hpp"
#include "bcae/le.hpp"

namespace bcae {
namespace {

constexpr char kMagic[4] = {'T', 'P', 'C', 'W'};

Shape common_extents(const Shape& hint, std::size_t count,
                     auto&& extents_of) {
  Shape e = hint;
  for (std::size_t i = 0; i < count; ++i) {
    const Shape& w = extents_of(i);
    if (e.empty()) e = w;
    if (w != e) {
      throw FormatError("extent mismatch: wedge " + std::to_string(i) + " is " +
                        to_string(w) + ", file is " + to_string(e));
    }
  }
  if (e.size() != 3) throw FormatError("extent mismatch: wedge files need 3 extents");
  return e;
}

void write_header(std::ostream& out, std::size_t count, const Shape& e, WedgeDtype dtype) {
  out.write(kMagic, 4);
  le::put_u8(out, kWedgeFileVersion);
  le::put_u32(out, le::checked_u32(count, "wedge count"));
  for (std::size_t v : e) le::put_u32(out, le::checked_u32(v, "extent"));
  le::put_u8(out, static_cast<std::uint8_t>(dtype));
}

}  // namespace

std::vector<LogWedge> WedgeFile::log_wedges() const {
  if (dtype == WedgeDtype::kLogF32) return log;
  std::vector<LogWedge> out;
  out.reserve(raw.size());
  for (const auto& w : raw) out.push_back(log_transform(w));
  return out;
}

void write_wedges(std::ostream& out, std::span<const RawWedge> wedges, const Shape& extents) {
  const Shape e =
      common_extents(extents, wedges.size(), [&](std::size_t i) -> const Shape& {
        return wedges[i].extents;
      });
  write_header(out, wedges.size(), e, WedgeDtype::kAdc16);
  for (const auto& w : wedges) {
    if (w.adc.size() != element_count(e)) {
      throw FormatError("extent mismatch: ADC payload does not match extents");
    }
    le::put_array(out, std::span<const std::uint16_t>(w.adc));
  }
  if (!out) throw Error("wedge write failed");
}

void write_wedges(std::ostream& out, std::span<const LogWedge> wedges, const Shape& extents) {
  std::vector<Shape> shapes;
  shapes.reserve(wedges.size());
  for (const auto& w : wedges) shapes.push_back(w.original_extents());
  const Shape e = common_extents(extents, wedges.size(),
                                 [&](std::size_t i) -> const Shape& { return shapes[i]; });
  write_header(out, wedges.size(), e, WedgeDtype::kLogF32);
  for (const auto& w : wedges) {
    const Tensor plain = w.padded ? clip_columns(w.values, w.original_horizontal) : w.values;
    le::put_array(out, plain.data());
  }
  if (!out) throw Error("wedge write failed");
}

WedgeFile read_wedges(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic: not a TPCW wedge file");
  }
  const std::uint8_t version = le::get_u8(in, "version");
  if (version != kWedgeFileVersion) {
    throw FormatError("unsupported wedge file version " + std::to_string(version));
  }
  WedgeFile f;
  const std::uint32_t count = le::get_u32(in, "wedge count");
  f.extents.resize(3);
  for (auto& v : f.extents) v = le::get_u32(in, "extents");
  const std::uint8_t dtype = le::get_u8(in, "dtype");
  if (dtype > 1) throw FormatError("unknown dtype tag " + std::to_string(dtype));
  f.dtype = static_cast<WedgeDtype>(dtype);
  const std::size_t n = element_count(f.extents);
  if (count > 0 && n == 0) throw FormatError("extent mismatch: zero-sized wedges");
  for (std::uint32_t i = 0; i < count; ++i) {
    if (f.dtype == WedgeDtype::kAdc16) {
      RawWedge w(f.extents);
      le::get_array(in, std::span<std::uint16_t>(w.adc), "truncated payload");
      for (auto v : w.adc) {
        if (v > kAdcMax) throw FormatError("ADC value exceeds the 10-bit range");
      }
      f.raw.push_back(std::move(w));
    } else {
      LogWedge w;
      w.values = Tensor(f.extents);
      le::get_array(in, w.values.data(), "truncated payload");
      w.original_horizontal = f.extents[2];
      f.log.push_back(std::move(w));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after " + std::to_string(count) + " wedges");
  }
  return f;
}

void write_wedge_file(const std::filesystem::path& path, std::span<const RawWedge> wedges,
                      const Shape& extents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_wedges(out, wedges, extents);
}

void write_wedge_file(const std::filesystem::path& path, std::span<const LogWedge> wedges,
                      const Shape& extents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_wedges(out, wedges, extents);
}

WedgeFile read_wedge_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_wedges(in);
}

}  // namespace bcae
