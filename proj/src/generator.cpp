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

#include "bcae/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "bcae/error.hpp"

namespace bcae {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kCalibrationEvent = ~std::uint64_t{0};
constexpr std::size_t kCalibrationVoxels = std::size_t{1} << 20;

}  // namespace

std::uint64_t wedge_stream(std::uint64_t seed, std::size_t event, std::size_t index) {
  return splitmix(splitmix(splitmix(seed) ^ event) ^ index);
}

void GeneratorConfig::validate() const {
  if (extents.size() != 3 || element_count(extents) == 0) {
    throw ConfigError("generator extents must be three positive values");
  }
  if (tracks_min > tracks_max) throw ConfigError("tracks_min exceeds tracks_max");
  if (!(peak_log_sigma >= 0.0)) throw ConfigError("peak_log_sigma must be >= 0");
  if (!(track_width > 0.0)) throw ConfigError("track_width must be positive");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw ConfigError("noise_rate must lie in [0, 1)");
  }
  if (target_occupancy && !(*target_occupancy > 0.0 && *target_occupancy < 1.0)) {
    throw ConfigError("target_occupancy must lie in (0, 1)");
  }
  if (!(occupancy_tolerance > 0.0)) throw ConfigError("occupancy_tolerance must be positive");
  if (calibration_wedges == 0 || calibration_rounds == 0) {
    throw ConfigError("calibration needs at least one wedge and one round");
  }
  if (wedges_per_event == 0) throw ConfigError("wedges_per_event must be positive");
}

nlohmann::json GeneratorConfig::to_json() const {
  nlohmann::json j;
  j["extents"] = extents;
  j["tracks_min"] = tracks_min;
  j["tracks_max"] = tracks_max;
  j["peak_log_mean"] = peak_log_mean;
  j["peak_log_sigma"] = peak_log_sigma;
  j["track_width"] = track_width;
  j["noise_rate"] = noise_rate;
  j["target_occupancy"] =
      target_occupancy ? nlohmann::json(*target_occupancy) : nlohmann::json(nullptr);
  j["occupancy_tolerance"] = occupancy_tolerance;
  j["calibration_wedges"] = calibration_wedges;
  j["calibration_rounds"] = calibration_rounds;
  j["seed"] = seed;
  j["events"] = events;
  j["wedges_per_event"] = wedges_per_event;
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.extents = j.value("extents", c.extents);
    c.tracks_min = j.value("tracks_min", c.tracks_min);
    c.tracks_max = j.value("tracks_max", c.tracks_max);
    c.peak_log_mean = j.value("peak_log_mean", c.peak_log_mean);
    c.peak_log_sigma = j.value("peak_log_sigma", c.peak_log_sigma);
    c.track_width = j.value("track_width", c.track_width);
    c.noise_rate = j.value("noise_rate", c.noise_rate);
    if (j.contains("target_occupancy")) {
      const auto& t = j.at("target_occupancy");
      c.target_occupancy = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
    }
    c.occupancy_tolerance = j.value("occupancy_tolerance", c.occupancy_tolerance);
    c.calibration_wedges = j.value("calibration_wedges", c.calibration_wedges);
    c.calibration_rounds = j.value("calibration_rounds", c.calibration_rounds);
    c.seed = j.value("seed", c.seed);
    c.events = j.value("events", c.events);
    c.wedges_per_event = j.value("wedges_per_event", c.wedges_per_event);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

WedgeGenerator::WedgeGenerator(GeneratorConfig config) : config_(std::move(config)) {
  config_.validate();
  if (!config_.target_occupancy) return;
  const double target = *config_.target_occupancy;
  if (config_.tracks_max == 0) {
    throw ConfigError("occupancy target needs a nonzero track range");
  }
  // Occupancy is monotone in the track count but saturates through overlap,
  // so iterate a damped multiplicative correction.
  double scale = 1.0;
  double occ = 0.0;
  for (std::size_t round = 0; round < config_.calibration_rounds; ++round) {
    occ = mean_occupancy(scale);
    if (std::abs(occ - target) <= config_.occupancy_tolerance) {
      scale_ = scale;
      return;
    }
    const double step = occ > 0.0 ? target / occ : 4.0;
    scale *= std::clamp(step, 0.25, 4.0);
    if (scale > 1e4 || scale < 1e-4) break;
  }
  throw ConfigError("occupancy target " + std::to_string(target) +
                    " not reached after calibration (last " + std::to_string(occ) +
                    ")");
}

std::size_t WedgeGenerator::tracks_min() const {
  return static_cast<std::size_t>(std::llround(config_.tracks_min * scale_));
}

std::size_t WedgeGenerator::tracks_max() const {
  return static_cast<std::size_t>(std::llround(config_.tracks_max * scale_));
}

double WedgeGenerator::mean_occupancy(double scale) const {
  // Small wedges are noisy; pool at least kCalibrationVoxels voxels.
  const std::size_t volume = element_count(config_.extents);
  const std::size_t wedges = std::max(config_.calibration_wedges,
                                      (kCalibrationVoxels + volume - 1) / volume);
  double total = 0.0;
  for (std::size_t i = 0; i < wedges; ++i) {
    total += occupancy(render(wedge_stream(config_.seed, kCalibrationEvent, i), scale));
  }
  return total / static_cast<double>(wedges);
}

RawWedge WedgeGenerator::wedge(std::size_t event, std::size_t index) const {
  return render(wedge_stream(config_.seed, event, index), scale_);
}

std::vector<RawWedge> WedgeGenerator::event(std::size_t event) const {
  std::vector<RawWedge> out;
  out.reserve(config_.wedges_per_event);
  for (std::size_t i = 0; i < config_.wedges_per_event; ++i) out.push_back(wedge(event, i));
  return out;
}

std::vector<RawWedge> WedgeGenerator::generate(std::size_t threads) const {
  const std::size_t per = config_.wedges_per_event;
  std::vector<RawWedge> out(config_.events * per);
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(out.size(), 1));
  auto work = [&](std::size_t t) {
    for (std::size_t i = t; i < out.size(); i += threads) out[i] = wedge(i / per, i % per);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();
  return out;
}

RawWedge WedgeGenerator::render(std::uint64_t stream, double scale) const {
  const GeneratorConfig& c = config_;
  const std::size_t R = c.extents[0], A = c.extents[1], H = c.extents[2];
  std::mt19937_64 rng(stream);
  std::vector<float> charge(R * A * H, 0.0f);

  const auto lo = static_cast<std::size_t>(std::llround(c.tracks_min * scale));
  const auto hi = static_cast<std::size_t>(std::llround(c.tracks_max * scale));
  const std::size_t tracks = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = c.track_width;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  for (std::size_t k = 0; k < tracks; ++k) {
    const double peak = std::exp(c.peak_log_mean + c.peak_log_sigma * normal(rng));
    const double a0 = unit(rng) * static_cast<double>(A);
    const double h0 = unit(rng) * static_cast<double>(H);
    const double slope_a = 1.5 * normal(rng);
    const double slope_h = 2.0 * normal(rng);
    const double curve = 0.05 * normal(rng);
    // Segments: most tracks cross every layer, some start or stop inside.
    std::size_t r_begin = 0, r_end = R;
    if (unit(rng) < 0.3) {
      r_begin = std::uniform_int_distribution<std::size_t>(0, R - 1)(rng);
      r_end = std::uniform_int_distribution<std::size_t>(r_begin + 1, R)(rng);
    }
    for (std::size_t r = r_begin; r < r_end; ++r) {
      const double t = static_cast<double>(r);
      const double ac = a0 + slope_a * t + curve * t * t;
      const double hc = h0 + slope_h * t;
      const int ai = static_cast<int>(std::floor(ac));
      const int hi_c = static_cast<int>(std::floor(hc));
      for (int a = ai - reach; a <= ai + reach + 1; ++a) {
        if (a < 0 || a >= static_cast<int>(A)) continue;
        const double da = a + 0.5 - ac;
        for (int h = hi_c - reach; h <= hi_c + reach + 1; ++h) {
          if (h < 0 || h >= static_cast<int>(H)) continue;
          const double dh = h + 0.5 - hc;
          const double v = peak * std::exp(-(da * da + dh * dh) * inv2s2);
          charge[(r * A + a) * H + h] += static_cast<float>(v);
        }
      }
    }
  }

  if (c.noise_rate > 0.0) {
    std::geometric_distribution<std::size_t> gap(c.noise_rate);
    std::exponential_distribution<double> amp(1.0 / 40.0);
    for (std::size_t i = gap(rng); i < charge.size(); i += gap(rng) + 1) {
      charge[i] += static_cast<float>(kSuppressionThreshold + amp(rng));
    }
  }

  RawWedge raw(c.extents);
  for (std::size_t i = 0; i < charge.size(); ++i) {
    const double q = std::min<double>(std::round(charge[i]), kAdcMax);
    raw.adc[i] = static_cast<std::uint16_t>(q);
  }
  return zero_suppress(raw);
}

}  // namespace bcae
