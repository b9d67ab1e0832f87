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

#include "bcae/codec.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "bcae/error.hpp"
#include "bcae/le.hpp"

namespace bcae {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'A', 'C'};

void put_shape(std::ostream& out, const Shape& s) {
  le::put_u8(out, static_cast<std::uint8_t>(s.size()));
  for (std::size_t d : s) le::put_u32(out, le::checked_u32(d, "extent"));
}

Shape get_shape(std::istream& in, const char* what) {
  const std::uint8_t rank = le::get_u8(in, what);
  if (rank == 0 || rank > 8) throw FormatError(std::string("implausible rank for ") + what);
  Shape s(rank);
  for (auto& d : s) d = le::get_u32(in, what);
  return s;
}

// Runs fn(i) for i in [0, n) over `threads` workers; the first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t t) {
    try {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Code CodeFile::code(std::size_t i) const {
  Code c;
  c.shape = code_shape;
  c.payload = payloads.at(i);
  c.model_id = model_id;
  c.original_extents = original_extents;
  return c;
}

CodeFile CodeFile::from_codes(const BcaeModel& model, std::span<const Code> codes) {
  CodeFile f;
  f.model_id = model.model_id();
  f.spec_digest = model.spec().digest();
  f.original_extents = model.spec().wedge_extents;
  f.code_shape = model.spec().code_shape();
  for (const auto& c : codes) {
    if (c.model_id != f.model_id) throw FormatError("code from a different model");
    if (c.shape != f.code_shape || c.original_extents != f.original_extents) {
      throw FormatError("code shape or extents differ from the model's");
    }
    f.payloads.push_back(c.payload);
  }
  return f;
}

void write_codes(std::ostream& out, const CodeFile& f) {
  out.write(kMagic, 4);
  le::put_u8(out, kCodeFileVersion);
  if (f.model_id.size() > 255) throw FormatError("model id too long");
  le::put_u8(out, static_cast<std::uint8_t>(f.model_id.size()));
  out.write(f.model_id.data(), static_cast<std::streamsize>(f.model_id.size()));
  le::put_u64(out, f.spec_digest);
  put_shape(out, f.original_extents);
  put_shape(out, f.code_shape);
  le::put_u32(out, le::checked_u32(f.payloads.size(), "code count"));
  const std::size_t n = element_count(f.code_shape);
  for (const auto& p : f.payloads) {
    if (p.size() != n) throw FormatError("payload size does not match the code shape");
    le::put_array(out, std::span<const Half>(p));
  }
  if (!out) throw Error("code write failed");
}

CodeFile read_codes(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic: not a BCAC code file");
  }
  const std::uint8_t version = le::get_u8(in, "version");
  if (version != kCodeFileVersion) {
    throw FormatError("unsupported code file version " + std::to_string(version));
  }
  CodeFile f;
  const std::uint8_t id_len = le::get_u8(in, "model id length");
  f.model_id.resize(id_len);
  in.read(f.model_id.data(), id_len);
  if (in.gcount() != id_len) throw FormatError("truncated header: model id");
  f.spec_digest = le::get_u64(in, "spec digest");
  f.original_extents = get_shape(in, "original extents");
  f.code_shape = get_shape(in, "code shape");
  const std::uint32_t count = le::get_u32(in, "code count");
  const std::size_t n = element_count(f.code_shape);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<Half> p(n);
    le::get_array(in, std::span<Half>(p), "truncated payload");
    f.payloads.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after " + std::to_string(count) + " codes");
  }
  return f;
}

void write_code_file(const std::filesystem::path& path, const CodeFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_codes(out, file);
}

CodeFile read_code_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_codes(in);
}

std::size_t default_threads() {
  if (const char* env = std::getenv("BCAE_NUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0) {
      throw ConfigError("BCAE_NUM_THREADS must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Code> compress(const BcaeModel& model, std::span<const LogWedge> wedges,
                           Precision precision, std::size_t threads) {
  const EncoderSession session(model, precision);
  std::vector<Code> codes(wedges.size());
  parallel_for(wedges.size(), threads, [&](std::size_t i) {
    const LogWedge& w = wedges[i];
    codes[i] = session.encode(w.padded ? w : pad_horizontal(w));
  });
  return codes;
}

std::vector<Reconstruction> decompress(const BcaeModel& model, const CodeFile& codes,
                                       std::optional<double> threshold,
                                       std::size_t threads) {
  if (codes.spec_digest != model.spec().digest()) {
    throw FormatError("code file spec digest does not match the checkpoint's model");
  }
  if (codes.model_id != model.model_id()) {
    throw FormatError("code file was produced by model " + codes.model_id +
                      ", checkpoint holds model " + model.model_id());
  }
  std::vector<Reconstruction> out(codes.size());
  parallel_for(codes.size(), threads,
               [&](std::size_t i) { out[i] = decode(model, codes.code(i), threshold); });
  return out;
}

nlohmann::json BenchReport::to_json() const {
  return {{"model_id", model_id},
          {"variant", variant},
          {"precision", to_string(precision)},
          {"batch", batch},
          {"warmup_iters", warmup},
          {"timed_iters", iters},
          {"threads", threads},
          {"full_pipeline", full_pipeline},
          {"wedges_per_second_mean", wedges_per_second_mean},
          {"wedges_per_second_std", wedges_per_second_std},
          {"encoder_parameters", encoder_parameters},
          {"decoder_parameters", decoder_parameters}};
}

BenchReport bench(const BcaeModel& model, std::span<const LogWedge> wedges,
                  const BenchConfig& config) {
  if (config.iters < kMinTimedIters) {
    throw ConfigError("bench needs at least " + std::to_string(kMinTimedIters) +
                      " timed iterations, got " + std::to_string(config.iters));
  }
  if (config.batch == 0) throw ConfigError("bench batch must be positive");
  if (wedges.empty()) throw ConfigError("bench needs at least one wedge");
  const ModelSpec& spec = model.spec();

  // Inputs are laid out before any timing.
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < config.batch; ++i) {
    const LogWedge& w = wedges[i % wedges.size()];
    inputs.push_back(network_input(spec, w.padded ? w : pad_horizontal(w)));
  }
  const EncoderSession session(model, config.precision);
  auto run_batch = [&] {
    parallel_for(inputs.size(), config.threads, [&](std::size_t i) {
      const Tensor latent = session.run(inputs[i]);
      if (config.full_pipeline) {
        const Tensor code = cast_precision<float>(cast_precision<Half>(latent));
        forward<float>(model.graph(Head::kSegmentation), model.params(Head::kSegmentation),
                       code);
        forward<float>(model.graph(Head::kRegression), model.params(Head::kRegression),
                       code);
      }
    });
  };

  for (std::size_t i = 0; i < config.warmup; ++i) run_batch();
  std::vector<double> rates;
  rates.reserve(config.iters);
  for (std::size_t i = 0; i < config.iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_batch();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rates.push_back(static_cast<double>(config.batch) / dt.count());
  }
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(rates.size());
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rates.size() - 1);

  BenchReport rep;
  rep.model_id = model.model_id();
  rep.variant = to_string(spec.variant);
  rep.precision = config.precision;
  rep.batch = config.batch;
  rep.warmup = config.warmup;
  rep.iters = config.iters;
  rep.threads = config.threads;
  rep.full_pipeline = config.full_pipeline;
  rep.wedges_per_second_mean = mean;
  rep.wedges_per_second_std = std::sqrt(var);
  rep.encoder_parameters = model.parameter_count(Head::kEncoder);
  rep.decoder_parameters =
      model.parameter_count(Head::kSegmentation) + model.parameter_count(Head::kRegression);
  return rep;
}

}  // namespace bcae
