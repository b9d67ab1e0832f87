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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcae/loss.hpp"
#include "bcae/metrics.hpp"
#include "bcae/model.hpp"
#include "json.hpp"

namespace bcae {

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t epochs = 1;
  double lr0 = 1e-3;
  std::size_t warm_epochs = 100;
  std::size_t decay_every = 20;
  double decay_factor = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  LossConfig loss;
  /// Share of the training set held back for per-epoch metrics.
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Wedges of a batch are processed on this many threads; results do not
  /// depend on it.
  std::size_t threads = 1;

  /// Warm/decay lengths 100/20 for the 3D variants, 50/10 for BCAE-2D.
  static TrainConfig defaults_for(Variant variant);
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// lr0 before warm_epochs, then lr0 * factor^(floor((e - warm) / every) + 1).
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;

  /// Zero moments shaped like `params`.
  static AdamState zeros_like(std::span<const Tensor> params);
};

/// One AdamW update with decoupled weight decay (p -= lr * wd * p).
void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads,
                AdamState& state, double lr, const TrainConfig& config);

/// One row of the training log.
struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double c = 0.0;         // coefficient used during this epoch
  double rho_seg = 0.0;   // epoch-mean segmentation loss
  double rho_reg = 0.0;   // epoch-mean regression loss
  double mae = 0.0;       // held-out metrics
  std::optional<double> precision;
  std::optional<double> recall;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

/// Columns: epoch,lr,c_t,rho_s,rho_r,mae,precision,recall.
std::string train_log_header();
std::string train_log_row(const EpochLog& row);

/// Everything needed to continue a run.
struct TrainState {
  BcaeModel model;
  TrainConfig config;
  AdamState adam;
  BalancerState balancer;
  std::size_t epoch = 0;  // completed epochs
  std::vector<EpochLog> log;

  /// Seeded initialization, zero moments, c = c0.
  TrainState(const ModelSpec& spec, const TrainConfig& config);
  TrainState(BcaeModel model, TrainConfig config);
};

struct StepResult {
  double seg_loss = 0.0;  // batch means
  double reg_loss = 0.0;
  double combined = 0.0;
};

/// Per-wedge losses and parameter gradients (summed into `grads`).
/// Wedges must be padded. Throws NumericError naming the first non-finite
/// operator when a loss is not finite.
StepResult accumulate_gradients(const BcaeModel& model, const LogWedge& wedge,
                                double c, const LossConfig& loss,
                                std::span<Tensor> grads);

/// Gradient of the batch-mean of c * L_seg + L_reg, then one AdamW step.
StepResult train_step(TrainState& state, std::span<const LogWedge* const> batch,
                      double lr);

/// Held-out / test evaluation through the codec (full32 encoder, binary16
/// code). Metrics are computed on the unpadded extents.
MetricsReport evaluate(const BcaeModel& model, std::span<const LogWedge> wedges,
                       std::optional<double> threshold = std::nullopt,
                       std::vector<MetricsReport>* per_wedge = nullptr);

/// Indices of the training and held-out slices of a dataset of `count`
/// wedges.
struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
HoldoutSplit holdout_split(std::size_t count, double fraction, std::uint64_t seed);

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

/// Trains until `state.epoch == until_epoch` on padded wedges.
void train(TrainState& state, std::span<const LogWedge> dataset, std::size_t until_epoch,
           const EpochCallback& on_epoch = {});

/// Fresh run for config.epochs epochs.
TrainState train(const ModelSpec& spec, std::span<const LogWedge> dataset,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

/// "BCKP" v1: u32 header length, JSON header, then named LE f32 tensors.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
void write_checkpoint(std::ostream& out, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);
TrainState read_checkpoint(std::istream& in);

struct GridCell {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t encoder_parameters = 0;
  MetricsReport metrics;
};

struct GridReport {
  std::vector<std::size_t> ms;
  std::vector<std::size_t> ns;
  std::vector<GridCell> cells;  // row-major over (m, n)

  const GridCell& at(std::size_t mi, std::size_t ni) const {
    return cells.at(mi * ns.size() + ni);
  }
  /// One matrix per metric, rows m, columns n.
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Trains BCAE-2D(m, n, d) for every cell from `base` and evaluates on
/// `test`.
GridReport grid_search(std::span<const std::size_t> ms, std::span<const std::size_t> ns,
                       std::size_t d, const ModelSpec& base,
                       std::span<const LogWedge> train_set,
                       std::span<const LogWedge> test_set, const TrainConfig& config);

}  // namespace bcae
