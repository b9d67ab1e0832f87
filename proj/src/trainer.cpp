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

#include "bcae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

#include "bcae/error.hpp"
#include "bcae/generator.hpp"

namespace bcae {
namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct HeadRanges {
  std::size_t enc, seg, reg;
};

HeadRanges head_ranges(const BcaeModel& model) {
  return {model.params(Head::kEncoder).size(), model.params(Head::kSegmentation).size(),
          model.params(Head::kRegression).size()};
}

std::vector<Tensor> zeros_like(std::span<const Tensor> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.shape());
  return out;
}

std::string diagnose(const BcaeModel& model, const Tensor& input) {
  const auto& spec = model.spec();
  if (auto at = first_nonfinite_layer(model.graph(Head::kEncoder),
                                      model.params(Head::kEncoder), input)) {
    return "encoder." + *at;
  }
  const Tensor z = forward<float>(model.graph(Head::kEncoder), model.params(Head::kEncoder),
                                  input);
  if (auto at = first_nonfinite_layer(model.graph(Head::kSegmentation),
                                      model.params(Head::kSegmentation), z)) {
    return "seg_decoder." + *at;
  }
  if (auto at = first_nonfinite_layer(model.graph(Head::kRegression),
                                      model.params(Head::kRegression), z)) {
    return "reg_decoder." + *at;
  }
  const Tensor raw = forward<float>(model.graph(Head::kRegression),
                                    model.params(Head::kRegression), z);
  const Tensor reg = activation_forward(
      raw, Activation::exp_affine(spec.transform_a, spec.transform_b));
  if (!all_finite(reg)) return "reg_decoder.transform (exp_affine)";
  return "loss";
}

}  // namespace

TrainConfig TrainConfig::defaults_for(Variant variant) {
  TrainConfig c;
  if (variant == Variant::kBcae2d) {
    c.warm_epochs = 50;
    c.decay_every = 10;
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (decay_every == 0) throw ConfigError("decay_every must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw ConfigError("decay_factor must lie in (0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  }
  if (threads == 0) throw ConfigError("threads must be positive");
  loss.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"lr0", lr0},
          {"warm_epochs", warm_epochs},
          {"decay_every", decay_every},
          {"decay_factor", decay_factor},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"weight_decay", weight_decay},
          {"gamma", loss.gamma},
          {"threshold", loss.threshold},
          {"balancer_c0", loss.balancer_c0},
          {"holdout_fraction", holdout_fraction},
          {"seed", seed},
          {"threads", threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.lr0 = j.value("lr0", c.lr0);
    c.warm_epochs = j.value("warm_epochs", c.warm_epochs);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.loss.gamma = j.value("gamma", c.loss.gamma);
    c.loss.threshold = j.value("threshold", c.loss.threshold);
    c.loss.balancer_c0 = j.value("balancer_c0", c.loss.balancer_c0);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  if (epoch < config.warm_epochs) return config.lr0;
  const std::size_t cuts = (epoch - config.warm_epochs) / config.decay_every + 1;
  return config.lr0 * std::pow(config.decay_factor, static_cast<double>(cuts));
}

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
  AdamState s;
  s.m = bcae::zeros_like(params);
  s.v = bcae::zeros_like(params);
  return s;
}

void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
                double lr, const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adamw_step", "tensor count", params.size(), grads.size());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - lr * config.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) {
      throw DimensionError("adamw_step", "gradient size", p.size(), g.size());
    }
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = lr * (mi / bc1) / (std::sqrt(vi / bc2) + config.adam_eps);
      p[i] = static_cast<float>(static_cast<double>(p[i]) * decay - step);
    }
  }
}

std::string train_log_header() { return "epoch,lr,c_t,rho_s,rho_r,mae,precision,recall"; }

std::string train_log_row(const EpochLog& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
  };
  return std::to_string(r.epoch) + "," + format_number(r.lr) + "," + format_number(r.c) +
         "," + format_number(r.rho_seg) + "," + format_number(r.rho_reg) + "," +
         format_number(r.mae) + "," + opt(r.precision) + "," + opt(r.recall);
}

TrainState::TrainState(const ModelSpec& spec, const TrainConfig& cfg)
    : model(spec), config(cfg) {
  config.validate();
  model.initialize(config.seed);
  adam = AdamState::zeros_like(model.all_params());
  balancer.c = config.loss.balancer_c0;
}

TrainState::TrainState(BcaeModel m, TrainConfig cfg)
    : model(std::move(m)), config(std::move(cfg)) {
  config.validate();
  adam = AdamState::zeros_like(model.all_params());
  balancer.c = config.loss.balancer_c0;
}

StepResult accumulate_gradients(const BcaeModel& model, const LogWedge& wedge, double c,
                                const LossConfig& loss, std::span<Tensor> grads) {
  const ModelSpec& spec = model.spec();
  const HeadRanges r = head_ranges(model);
  if (grads.size() != r.enc + r.seg + r.reg) {
    throw DimensionError("accumulate_gradients", "tensor count", r.enc + r.seg + r.reg,
                         grads.size());
  }
  const Tensor x = network_input(spec, wedge);
  const Tensor& target = x;
  Tensor labels(target.shape());
  for (std::size_t i = 0; i < target.size(); ++i) labels[i] = target[i] > 0.0f ? 1.0f : 0.0f;

  Tape<float> enc_tape, seg_tape, reg_tape;
  const Tensor z = forward<float>(model.graph(Head::kEncoder), model.params(Head::kEncoder),
                                  x, &enc_tape);
  const Tensor seg = forward<float>(model.graph(Head::kSegmentation),
                                    model.params(Head::kSegmentation), z, &seg_tape);
  const Tensor raw = forward<float>(model.graph(Head::kRegression),
                                    model.params(Head::kRegression), z, &reg_tape);
  const Activation transform = Activation::exp_affine(spec.transform_a, spec.transform_b);
  const Tensor reg = activation_forward(raw, transform);

  LossValue<float> fl = focal_loss(seg, labels, loss.gamma);
  const LossValue<float> ml = masked_regression_loss(reg, target, seg, loss.threshold);
  if (!std::isfinite(fl.value) || !std::isfinite(ml.value) || !all_finite(reg)) {
    const std::string op = diagnose(model, x);
    throw NumericError("non-finite loss; first non-finite operator: " + op, op);
  }
  for (std::size_t i = 0; i < fl.grad.size(); ++i) {
    fl.grad[i] = static_cast<float>(c * fl.grad[i]);
  }
  const Tensor grad_raw = activation_backward(raw, reg, ml.grad, transform);

  const Tensor gz_seg = backward<float>(model.graph(Head::kSegmentation),
                                        model.params(Head::kSegmentation), seg_tape,
                                        std::move(fl.grad), grads.subspan(r.enc, r.seg));
  const Tensor gz_reg = backward<float>(model.graph(Head::kRegression),
                                        model.params(Head::kRegression), reg_tape, grad_raw,
                                        grads.subspan(r.enc + r.seg, r.reg));
  backward<float>(model.graph(Head::kEncoder), model.params(Head::kEncoder), enc_tape,
                  add(gz_seg, gz_reg), grads.subspan(0, r.enc));
  return {fl.value, ml.value, combined_loss(fl.value, ml.value, c)};
}

StepResult train_step(TrainState& state, std::span<const LogWedge* const> batch, double lr) {
  if (batch.empty()) throw ConfigError("empty training batch");
  const auto& params = state.model.all_params();
  const std::size_t n = batch.size();
  std::vector<std::vector<Tensor>> grads(n);
  std::vector<StepResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  const std::size_t threads = std::min(state.config.threads, n);
  auto work = [&](std::size_t t) {
    for (std::size_t i = t; i < n; i += threads) {
      try {
        grads[i] = zeros_like(params);
        results[i] = accumulate_gradients(state.model, *batch[i], state.balancer.c,
                                          state.config.loss, grads[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Fixed-order reduction keeps the step independent of the thread count.
  std::vector<Tensor> total = std::move(grads[0]);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < total.size(); ++k) {
      auto dst = total[k].data();
      const auto src = grads[i][k].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  const float inv = 1.0f / static_cast<float>(n);
  for (auto& g : total) {
    for (auto& v : g.data()) v *= inv;
  }
  adamw_step(state.model.all_params(), total, state.adam, lr, state.config);

  StepResult mean;
  for (const auto& r : results) {
    mean.seg_loss += r.seg_loss;
    mean.reg_loss += r.reg_loss;
    mean.combined += r.combined;
  }
  mean.seg_loss /= static_cast<double>(n);
  mean.reg_loss /= static_cast<double>(n);
  mean.combined /= static_cast<double>(n);
  return mean;
}

MetricsReport evaluate(const BcaeModel& model, std::span<const LogWedge> wedges,
                       std::optional<double> threshold,
                       std::vector<MetricsReport>* per_wedge) {
  const double h = threshold.value_or(model.spec().seg_threshold);
  const EncoderSession session(model, Precision::kFull32);
  std::vector<MetricsReport> reports;
  reports.reserve(wedges.size());
  for (const auto& w : wedges) {
    const Reconstruction rec = decode(model, session.encode(w), h);
    const Tensor target = clip_columns(w.values, w.original_horizontal);
    reports.push_back(compute_metrics(rec.values, rec.seg, target, h));
  }
  const MetricsReport total = aggregate(reports);
  if (per_wedge) *per_wedge = std::move(reports);
  return total;
}

HoldoutSplit holdout_split(std::size_t count, double fraction, std::uint64_t seed) {
  std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  if (fraction > 0.0 && count >= 2) k = std::clamp<std::size_t>(k, 1, count - 1);
  k = std::min(k, count);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(wedge_stream(seed, 0x686f6c64, 0));
  std::shuffle(order.begin(), order.end(), rng);
  HoldoutSplit s;
  s.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

void train(TrainState& state, std::span<const LogWedge> dataset, std::size_t until_epoch,
           const EpochCallback& on_epoch) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const TrainConfig& cfg = state.config;
  const HoldoutSplit split = holdout_split(dataset.size(), cfg.holdout_fraction, cfg.seed);
  std::vector<LogWedge> holdout;
  for (std::size_t i : split.holdout) holdout.push_back(dataset[i]);
  const std::span<const LogWedge> monitor =
      holdout.empty() ? dataset : std::span<const LogWedge>(holdout);

  while (state.epoch < until_epoch) {
    const std::size_t e = state.epoch;
    const double lr = lr_schedule(e, cfg);
    std::vector<std::size_t> order = split.train;
    std::mt19937_64 rng(wedge_stream(cfg.seed, e, 0x73687566));
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog row;
    row.epoch = e + 1;
    row.lr = lr;
    row.c = state.balancer.c;
    double seg_sum = 0.0, reg_sum = 0.0;
    std::vector<const LogWedge*> batch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset[order[i]]);
      const StepResult r = train_step(state, batch, lr);
      seg_sum += r.seg_loss * static_cast<double>(batch.size());
      reg_sum += r.reg_loss * static_cast<double>(batch.size());
    }
    row.rho_seg = seg_sum / static_cast<double>(order.size());
    row.rho_reg = reg_sum / static_cast<double>(order.size());

    const MetricsReport m = evaluate(state.model, monitor, cfg.loss.threshold);
    row.mae = m.mae;
    row.precision = m.precision;
    row.recall = m.recall;

    state.balancer = update_balancer(state.balancer, row.rho_seg, row.rho_reg);
    state.epoch = e + 1;
    state.log.push_back(row);
    if (on_epoch) on_epoch(row, state);
  }
}

TrainState train(const ModelSpec& spec, std::span<const LogWedge> dataset,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  TrainState state(spec, config);
  train(state, dataset, config.epochs, on_epoch);
  return state;
}

std::string GridReport::to_csv() const {
  std::string out;
  auto matrix = [&](const std::string& metric, auto&& value) {
    out += metric + ",m";
    for (std::size_t n : ns) out += ",n=" + std::to_string(n);
    out += "\n";
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
      out += metric + "," + std::to_string(ms[mi]);
      for (std::size_t ni = 0; ni < ns.size(); ++ni) out += "," + value(at(mi, ni));
      out += "\n";
    }
  };
  auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
  };
  matrix("mae", [](const GridCell& c) { return format_number(c.metrics.mae); });
  matrix("precision", [&](const GridCell& c) { return opt(c.metrics.precision); });
  matrix("recall", [&](const GridCell& c) { return opt(c.metrics.recall); });
  matrix("encoder_parameters",
         [](const GridCell& c) { return std::to_string(c.encoder_parameters); });
  return out;
}

nlohmann::json GridReport::to_json() const {
  nlohmann::json j;
  j["ms"] = ms;
  j["ns"] = ns;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell = bcae::to_json(c.metrics);
    cell["m"] = c.m;
    cell["n"] = c.n;
    cell["encoder_parameters"] = c.encoder_parameters;
    j["cells"].push_back(cell);
  }
  return j;
}

GridReport grid_search(std::span<const std::size_t> ms, std::span<const std::size_t> ns,
                       std::size_t d, const ModelSpec& base,
                       std::span<const LogWedge> train_set,
                       std::span<const LogWedge> test_set, const TrainConfig& config) {
  if (base.variant != Variant::kBcae2d) {
    throw ConfigError("grid search varies BCAE-2D encoder and decoder depth");
  }
  if (ms.empty() || ns.empty()) throw ConfigError("grid search needs at least one m and n");
  GridReport report;
  report.ms.assign(ms.begin(), ms.end());
  report.ns.assign(ns.begin(), ns.end());
  for (std::size_t m : ms) {
    for (std::size_t n : ns) {
      ModelSpec spec = base;
      spec.m = m;
      spec.n = n;
      spec.d = d;
      spec.validate();
      const TrainState state = train(spec, train_set, config);
      GridCell cell;
      cell.m = m;
      cell.n = n;
      cell.encoder_parameters = state.model.parameter_count(Head::kEncoder);
      cell.metrics = evaluate(state.model, test_set.empty() ? train_set : test_set);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace bcae
