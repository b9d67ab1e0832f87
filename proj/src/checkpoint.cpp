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

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "bcae/error.hpp"
#include "bcae/le.hpp"
#include "bcae/trainer.hpp"

namespace bcae {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'K', 'P'};
constexpr std::uint8_t kVersion = 1;
// Upper bound on the JSON header; guards against reading garbage lengths.
constexpr std::uint32_t kMaxHeader = 64u << 20;

nlohmann::json log_to_json(const EpochLog& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"epoch", r.epoch},     {"lr", r.lr},           {"c", r.c},
          {"rho_s", r.rho_seg},   {"rho_r", r.rho_reg},   {"mae", r.mae},
          {"precision", opt(r.precision)}, {"recall", opt(r.recall)}};
}

EpochLog log_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& v) {
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  EpochLog r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.lr = j.at("lr").get<double>();
  r.c = j.at("c").get<double>();
  r.rho_seg = j.at("rho_s").get<double>();
  r.rho_reg = j.at("rho_r").get<double>();
  r.mae = j.at("mae").get<double>();
  r.precision = opt(j.at("precision"));
  r.recall = opt(j.at("recall"));
  return r;
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

std::vector<NamedTensor> named_tensors(const TrainState& s) {
  const auto names = s.model.param_names();
  std::vector<NamedTensor> out;
  const auto& params = s.model.all_params();
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({names[i], &params[i]});
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.m." + names[i], &s.adam.m[i]});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.v." + names[i], &s.adam.v[i]});
  }
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainState& s) {
  nlohmann::json header;
  header["spec"] = s.model.spec().to_json();
  header["config"] = s.config.to_json();
  header["epoch"] = s.epoch;
  header["adam_step"] = s.adam.step;
  header["balancer"] = {
      {"c", s.balancer.c}, {"epoch", s.balancer.epoch}, {"stalled", s.balancer.stalled}};
  header["log"] = nlohmann::json::array();
  for (const auto& r : s.log) header["log"].push_back(log_to_json(r));
  header["model_id"] = s.model.model_id();
  const std::string text = header.dump();

  out.write(kMagic, 4);
  le::put_u8(out, kVersion);
  le::put_u32(out, le::checked_u32(text.size(), "checkpoint header"));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto tensors = named_tensors(s);
  le::put_u32(out, le::checked_u32(tensors.size(), "tensor count"));
  for (const auto& t : tensors) {
    le::put_u32(out, le::checked_u32(t.name.size(), "tensor name"));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    le::put_u32(out, le::checked_u32(t.tensor->rank(), "tensor rank"));
    for (std::size_t d : t.tensor->shape()) le::put_u32(out, le::checked_u32(d, "extent"));
    le::put_array(out, t.tensor->data());
  }
  if (!out) throw Error("checkpoint write failed");
}

TrainState read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic: not a BCKP checkpoint");
  }
  const std::uint8_t version = le::get_u8(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = le::get_u32(in, "header length");
  if (header_len > kMaxHeader) throw FormatError("checkpoint header length is implausible");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (in.gcount() != static_cast<std::streamsize>(header_len)) {
    throw FormatError("truncated header: checkpoint JSON");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  std::optional<TrainState> state;
  std::string expected_id;
  try {
    state.emplace(BcaeModel(ModelSpec::from_json(header.at("spec"))),
                  TrainConfig::from_json(header.at("config")));
    state->epoch = header.at("epoch").get<std::size_t>();
    state->adam.step = header.at("adam_step").get<std::size_t>();
    const auto& b = header.at("balancer");
    state->balancer.c = b.at("c").get<double>();
    state->balancer.epoch = b.at("epoch").get<std::size_t>();
    state->balancer.stalled = b.at("stalled").get<bool>();
    for (const auto& r : header.at("log")) state->log.push_back(log_from_json(r));
    expected_id = header.at("model_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  // Tensors are read into the fresh state; the caller never sees a partial one.
  const auto expected = named_tensors(*state);
  const std::uint32_t count = le::get_u32(in, "tensor count");
  if (count != expected.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                      std::to_string(expected.size()));
  }
  for (const auto& t : expected) {
    const std::uint32_t name_len = le::get_u32(in, "tensor name length");
    if (name_len > 4096) throw FormatError("tensor name length is implausible");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw FormatError("truncated payload: tensor name");
    }
    if (name != t.name) {
      throw FormatError("unexpected tensor '" + name + "', wanted '" + t.name + "'");
    }
    const std::uint32_t rank = le::get_u32(in, "tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = le::get_u32(in, "tensor extent");
    if (shape != t.tensor->shape()) {
      throw FormatError("tensor '" + name + "' has shape " + to_string(shape) +
                        ", model needs " + to_string(t.tensor->shape()));
    }
    auto* dst = const_cast<Tensor*>(t.tensor);
    le::get_array(in, dst->data(), "truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after checkpoint tensors");
  }
  if (state->model.model_id() != expected_id) {
    throw FormatError("checkpoint tensors do not match the recorded model id");
  }
  return std::move(*state);
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  // Write-then-rename so an interrupted save never clobbers a good file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, state);
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace bcae
