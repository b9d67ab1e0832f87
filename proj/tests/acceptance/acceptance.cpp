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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bcae/codec.hpp"
#include "bcae/error.hpp"
#include "bcae/generator.hpp"
#include "bcae/graph.hpp"
#include "bcae/loss.hpp"
#include "bcae/metrics.hpp"
#include "bcae/model.hpp"
#include "bcae/ops.hpp"
#include "bcae/trainer.hpp"
#include "bcae/wedge.hpp"
#include "bcae/wedge_io.hpp"
#include "support/oracles.hpp"

namespace bcae {
namespace {

using testing::finite_difference;
using testing::max_relative_error;
using testing::random_params;
using testing::random_tensor;
using testing::random_tensor_away_from_zero;
using testing::weighted_sum;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& text) { notes.push_back(text); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1 -------

Outcome shapes_and_ratios() {
  Outcome o;
  const Shape wedge{16, 192, 249};
  const ModelSpec s2 = ModelSpec::bcae2d();
  const ModelSpec pp = ModelSpec::bcaepp();
  const ModelSpec ht = ModelSpec::bcaeht();
  o.require(s2.code_shape() == Shape{32, 24, 32}, "2D code shape " + to_string(s2.code_shape()));
  o.require(pp.code_shape() == Shape{8, 16, 12, 16}, "3D code shape " + to_string(pp.code_shape()));
  o.require(ht.code_shape() == Shape{8, 16, 12, 16}, "HT code shape " + to_string(ht.code_shape()));
  for (const ModelSpec* s : {&s2, &pp, &ht}) {
    o.require(compression_ratio(wedge, s->code_shape()) == 31.125,
              std::string("ratio of ") + to_string(s->variant));
  }
  // The earlier 3D design kept 17 azimuthal rows and 13 horizontal columns.
  const double legacy = compression_ratio(wedge, {8, 17, 13, 16});
  o.require(std::round(legacy * 1000.0) / 1000.0 == 27.041, "legacy ratio " + fmt("%.6f", legacy));
  // Shapes also follow from actually running the encoders on a zero wedge.
  BcaeModel m2(s2);
  m2.initialize(1);
  LogWedge zero = pad_horizontal(log_transform(RawWedge(wedge)));
  const Code c2 = encode(m2, zero);
  o.require(c2.shape == Shape{32, 24, 32}, "encoded 2D shape " + to_string(c2.shape));
  o.note("2D " + to_string(s2.code_shape()) + ", 3D " + to_string(pp.code_shape()) +
         ", ratio 31.125, legacy " + fmt("%.3f", legacy));
  return o;
}

// ---------------------------------------------------------------- 2 -------

struct GradTally {
  std::map<std::string, double> worst;
  std::size_t checks = 0;
  void add(const std::string& op, double err) {
    auto& w = worst[op];
    w = std::max(w, err);
    ++checks;
  }
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void conv_case(std::mt19937_64& rng, std::size_t rank, bool transposed, GradTally& t) {
  const std::size_t k = pick(rng, 1, 3);
  const std::size_t s = pick(rng, 1, 2);
  const std::size_t p = pick(rng, 0, (k - 1) / 2);
  const ConvParams cp = ConvParams::uniform(rank, pick(rng, 1, 3), pick(rng, 1, 3), k, s, p);
  Shape in{cp.in_channels};
  for (std::size_t a = 0; a < rank; ++a) in.push_back(pick(rng, k, rank == 3 ? 4 : 6));
  Tensor64 x = random_tensor(in, rng);
  Tensor64 w = random_tensor(transposed ? cp.transposed_weight_shape() : cp.weight_shape(), rng);
  Tensor64 b = random_tensor({cp.out_channels}, rng);
  auto fwd = [&] {
    return transposed ? transposed_conv_forward(x, w, b, cp) : conv_forward(x, w, b, cp);
  };
  const Tensor64 r = random_tensor(fwd().shape(), rng);
  const auto g = transposed ? transposed_conv_backward(x, w, cp, r) : conv_backward(x, w, cp, r);
  auto loss = [&] { return weighted_sum(fwd(), r); };
  const std::string name = std::string(transposed ? "transposed_conv" : "conv") +
                           std::to_string(rank) + "d";
  t.add(name + ".input", max_relative_error(g.input.data(), finite_difference(x, loss)));
  t.add(name + ".weight", max_relative_error(g.weight.data(), finite_difference(w, loss)));
  t.add(name + ".bias", max_relative_error(g.bias.data(), finite_difference(b, loss)));

  // The float path must give the same analytic gradients.
  const auto gf = transposed
                      ? transposed_conv_backward(cast_precision<float>(x), cast_precision<float>(w),
                                                 cp, cast_precision<float>(r))
                      : conv_backward(cast_precision<float>(x), cast_precision<float>(w), cp,
                                      cast_precision<float>(r));
  t.add(name + ".float_vs_double",
        std::max(max_relative_error(cast_precision<double>(gf.weight).data(), g.weight.data(), 1e-2),
                 max_relative_error(cast_precision<double>(gf.input).data(), g.input.data(), 1e-2)));
}

void pool_case(std::mt19937_64& rng, GradTally& t) {
  Tensor64 x = random_tensor({pick(rng, 1, 3), 2 * pick(rng, 1, 3), 2 * pick(rng, 1, 3)}, rng);
  const Tensor64 rp = random_tensor(avgpool2d_forward(x).shape(), rng);
  const Tensor64 ru = random_tensor(upsample_nearest2d_forward(x).shape(), rng);
  t.add("avgpool2d", max_relative_error(avgpool2d_backward(rp).data(),
                                        finite_difference(x, [&] {
                                          return weighted_sum(avgpool2d_forward(x), rp);
                                        })));
  t.add("upsample2d", max_relative_error(upsample_nearest2d_backward(ru).data(),
                                         finite_difference(x, [&] {
                                           return weighted_sum(upsample_nearest2d_forward(x), ru);
                                         })));
}

void activation_case(std::mt19937_64& rng, GradTally& t) {
  for (const auto act : {Activation::relu(), Activation::sigmoid(),
                         Activation::exp_affine(6.0, 3.0), Activation::identity()}) {
    Tensor64 x = random_tensor_away_from_zero({2, 3, 4}, rng);
    const Tensor64 r = random_tensor(x.shape(), rng);
    const Tensor64 g = activation_backward(x, activation_forward(x, act), r, act);
    auto loss = [&] { return weighted_sum(activation_forward(x, act), r); };
    t.add(to_string(act), max_relative_error(g.data(), finite_difference(x, loss, 1e-6)));
  }
  {
    // The regression transform on both sides of its knee.
    const auto act = Activation::exp_affine(6.0, 3.0);
    const double knee_x = std::log(kExpAffineKnee / 3.0);
    Tensor64 x = random_tensor({16}, rng, knee_x - 3.0, knee_x + 3.0);
    for (auto& v : x.data()) {
      if (std::abs(v - knee_x) < 0.01) v += 0.02;
    }
    const Tensor64 r = random_tensor(x.shape(), rng);
    const Tensor64 g = activation_backward(x, activation_forward(x, act), r, act);
    auto loss = [&] { return weighted_sum(activation_forward(x, act), r); };
    t.add("exp_affine (wide range)", max_relative_error(g.data(), finite_difference(x, loss, 1e-6)));
  }
  Tensor64 a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
  const Tensor64 r = random_tensor({2, 3}, rng);
  auto loss = [&] { return weighted_sum(add(a, b), r); };
  t.add("add", std::max(max_relative_error(r.data(), finite_difference(a, loss)),
                        max_relative_error(r.data(), finite_difference(b, loss))));
}

void graph_case(std::mt19937_64& rng, GradTally& t) {
  const LayerGraph g = residual_block(2);
  std::vector<Tensor64> params = random_params(g, rng);
  Tensor64 x = random_tensor({2, 3, 4}, rng);
  Tape<double> tape;
  const Tensor64 y = forward<double>(g, params, x, &tape);
  const Tensor64 r = random_tensor(y.shape(), rng);
  std::vector<Tensor64> grads;
  for (const auto& d : g.params) grads.emplace_back(d.shape);
  const Tensor64 gx = backward<double>(g, params, tape, r, grads);
  auto loss = [&] { return weighted_sum(forward<double>(g, params, x), r); };
  double worst = max_relative_error(gx.data(), finite_difference(x, loss, 1e-6));
  for (std::size_t i = 0; i < params.size(); ++i) {
    worst = std::max(worst, max_relative_error(grads[i].data(),
                                                finite_difference(params[i], loss, 1e-6)));
  }
  t.add("residual_block", worst);
}

void loss_case(std::mt19937_64& rng, GradTally& t) {
  const std::size_t n = pick(rng, 2, 24);
  std::uniform_real_distribution<double> prob(0.05, 0.95), adc(6.0, 10.0), off(0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  Tensor64 seg({n}), labels({n}), reg({n}), target({n});
  for (std::size_t i = 0; i < n; ++i) {
    seg[i] = prob(rng);
    if (std::abs(seg[i] - 0.5) < 0.01) seg[i] += 0.02;  // keep the mask fixed under probing
    labels[i] = coin(rng) ? 1.0 : 0.0;
    target[i] = coin(rng) ? adc(rng) : 0.0;
    reg[i] = target[i] + (coin(rng) ? off(rng) : -off(rng));
  }
  const double gamma = static_cast<double>(pick(rng, 0, 3));
  const auto fl = focal_loss(seg, labels, gamma);
  t.add("focal_loss", max_relative_error(fl.grad.data(), finite_difference(seg, [&] {
                                           return focal_loss(seg, labels, gamma).value;
                                         }, 1e-6)));
  const auto ml = masked_regression_loss(reg, target, seg, 0.5);
  t.add("masked_mae", max_relative_error(ml.grad.data(), finite_difference(reg, [&] {
                                           return masked_regression_loss(reg, target, seg, 0.5)
                                               .value;
                                         }, 1e-6)));
}

Outcome gradient_suite() {
  Outcome o;
  GradTally t;
  constexpr int kSeeds = 100;
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(0x9e3779b9ULL + static_cast<std::uint64_t>(seed));
    conv_case(rng, 2, false, t);
    conv_case(rng, 3, false, t);
    conv_case(rng, 2, true, t);
    conv_case(rng, 3, true, t);
    pool_case(rng, t);
    activation_case(rng, t);
    graph_case(rng, t);
    loss_case(rng, t);
  }
  double worst = 0.0;
  for (const auto& [op, err] : t.worst) {
    o.require(err <= 1e-4, op + " relative error " + fmt("%.3g", err));
    worst = std::max(worst, err);
  }
  o.note(std::to_string(t.checks) + " gradient checks over " + std::to_string(kSeeds) +
         " seeds, " + std::to_string(t.worst.size()) + " operators, worst rel err " +
         fmt("%.3g", worst));
  return o;
}

// ---------------------------------------------------------------- 3 -------

Outcome loss_algebra() {
  Outcome o;
  auto scalar = [](double v) { return Tensor64({1}, v); };
  const double f = focal_loss(scalar(0.5), scalar(1.0), 2.0).value;
  o.require(std::abs(f - 0.25) <= 1e-9, "focal(0.5 | 1, gamma 2) = " + fmt("%.12g", f));
  const double f0 = focal_loss(scalar(0.5), scalar(0.0), 2.0).value;
  o.require(std::abs(f0 - 0.25) <= 1e-9, "focal(0.5 | 0, gamma 2) = " + fmt("%.12g", f0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> p(0.01, 0.99);
  std::bernoulli_distribution coin(0.3);
  Tensor64 seg({1000}), labels({1000});
  double bce = 0.0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    seg[i] = p(rng);
    labels[i] = coin(rng) ? 1.0 : 0.0;
    bce += labels[i] > 0 ? -std::log2(seg[i]) : -std::log2(1.0 - seg[i]);
  }
  bce /= 1000.0;
  const double g0 = focal_loss(seg, labels, 0.0).value;
  o.require(std::abs(g0 - bce) <= 1e-9, "gamma 0 vs BCE in bits " + fmt("%.3g", g0 - bce));

  const double kept = masked_regression_loss(scalar(7), scalar(6.5), scalar(0.9), 0.5).value;
  const double dropped = masked_regression_loss(scalar(7), scalar(6.5), scalar(0.3), 0.5).value;
  o.require(std::abs(kept - 0.5) <= 1e-9, "masked MAE kept voxel " + fmt("%.12g", kept));
  o.require(std::abs(dropped - 6.5) <= 1e-9, "masked MAE dropped voxel " + fmt("%.12g", dropped));
  const Tensor64 rv({4}, {7.0, 9.0, 8.0, 6.5}), tv({4}, {6.5, 0.0, 8.5, 7.0}),
      sv({4}, {0.9, 0.2, 0.6, 0.51});
  // |7-6.5| + |0-0| + |8-8.5| + |6.5-7| = 1.5 over 4 voxels.
  const double mixed = masked_regression_loss(rv, tv, sv, 0.5).value;
  o.require(std::abs(mixed - 0.375) <= 1e-9, "masked MAE mixed " + fmt("%.12g", mixed));

  // Balancer: one hand step, the fixed point and |c_t - r| = 3^-t |c_0 - r|.
  const BalancerState c1 = update_balancer(BalancerState{2000.0, 0, false}, 1.0, 500.0);
  o.require(std::abs(c1.c - 1000.0) <= 1e-9, "balancer step " + fmt("%.12g", c1.c));
  double worst = 0.0;
  for (double r : {0.01, 1.0, 37.5, 500.0, 2000.0, 1e5}) {
    worst = std::max(worst, std::abs(update_balancer(BalancerState{r, 0, false}, 2.0, 2.0 * r).c -
                                     r) / r);
    BalancerState s{2000.0, 0, false};
    for (int step = 1; step <= 20; ++step) {
      s = update_balancer(s, 1.0, r);
      const double expect = std::abs(2000.0 - r) * std::pow(3.0, -step);
      worst = std::max(worst, std::abs(std::abs(s.c - r) - expect) / std::max(1.0, 2000.0));
    }
  }
  o.require(worst <= 1e-9, "balancer identities " + fmt("%.3g", worst));
  o.note("focal 0.25, BCE identity " + fmt("%.2g", std::abs(g0 - bce)) +
         ", balancer worst deviation " + fmt("%.2g", worst));
  return o;
}

// ---------------------------------------------------------------- 4, 5 ----

std::vector<LogWedge> to_log(const std::vector<RawWedge>& raw) {
  std::vector<LogWedge> out;
  for (const auto& r : raw) out.push_back(pad_horizontal(log_transform(r)));
  return out;
}

// Desk-scale synthetic sample: fewer, wider tracks than the full-size
// generator, same occupancy target.
GeneratorConfig desk_generator(std::size_t events, std::uint64_t seed) {
  GeneratorConfig g;
  g.extents = {16, 48, 64};
  g.events = events;
  g.wedges_per_event = 1;
  g.seed = seed;
  g.tracks_min = 10;
  g.tracks_max = 25;
  g.track_width = 3.5;
  return g;
}

struct Learned {
  std::vector<LogWedge> train;
  std::vector<LogWedge> test;
  std::unique_ptr<TrainState> state;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double c1 = 0.0;
  MetricsReport held_out;
};

// Mean combined loss over a dataset at a fixed coefficient.
double mean_combined(const BcaeModel& model, std::span<const LogWedge> data, double c,
                     const LossConfig& loss) {
  std::vector<Tensor> scratch;
  double total = 0.0;
  for (const auto& w : data) {
    scratch.clear();
    for (const auto& p : model.all_params()) scratch.emplace_back(p.shape());
    total += accumulate_gradients(model, w, c, loss, scratch).combined;
  }
  return total / static_cast<double>(data.size());
}

Learned& learned() {
  static std::unique_ptr<Learned> cache;
  if (cache) return *cache;
  cache = std::make_unique<Learned>();
  Learned& l = *cache;
  const auto all = to_log(WedgeGenerator(desk_generator(80, 1)).generate(default_threads()));
  l.train.assign(all.begin(), all.begin() + 64);
  l.test.assign(all.begin() + 64, all.end());

  ModelSpec spec = ModelSpec::bcae2d(2, 2, 2);
  spec.trunk_width = 32;
  spec.code_channels = 32;
  spec.wedge_extents = {16, 48, 64};
  TrainConfig cfg = TrainConfig::defaults_for(Variant::kBcae2d);
  cfg.epochs = 30;
  cfg.seed = 3;
  cfg.threads = default_threads();

  l.state = std::make_unique<TrainState>(spec, cfg);
  l.c1 = l.state->balancer.c;
  l.loss_before = mean_combined(l.state->model, l.train, l.c1, cfg.loss);
  train(*l.state, l.train, cfg.epochs, [](const EpochLog& row, const TrainState&) {
    std::printf("    epoch %2zu  c %.4g  seg %.4f  reg %.4f  holdout mae %.4f p %.3f r %.3f\n",
                row.epoch, row.c, row.rho_seg, row.rho_reg, row.mae,
                row.precision.value_or(NAN), row.recall.value_or(NAN));
    std::fflush(stdout);
  });
  l.loss_after = mean_combined(l.state->model, l.train, l.c1, cfg.loss);
  l.held_out = evaluate(l.state->model, l.test);
  return l;
}

Outcome learnability() {
  Outcome o;
  const Learned& l = learned();
  const double reduction = 1.0 - l.loss_after / l.loss_before;
  o.require(reduction >= 0.5, "combined loss reduction " + fmt("%.3f", reduction));
  const double p = l.held_out.precision.value_or(0.0);
  const double r = l.held_out.recall.value_or(0.0);
  o.require(p >= 0.8, "held-out precision " + fmt("%.4f", p));
  o.require(r >= 0.8, "held-out recall " + fmt("%.4f", r));
  o.note("combined loss at c=" + fmt("%.0f", l.c1) + ": " + fmt("%.4g", l.loss_before) +
         " -> " + fmt("%.4g", l.loss_after) + " (" + fmt("%.1f", 100 * reduction) +
         "% lower); held-out precision " + fmt("%.3f", p) + ", recall " + fmt("%.3f", r) +
         ", mae " + fmt("%.4f", l.held_out.mae));

  // Single batch of four wedges, fresh model.
  TrainConfig cfg = l.state->config;
  TrainState s(l.state->model.spec(), cfg);
  std::vector<const LogWedge*> batch = {&l.train[0], &l.train[1], &l.train[2], &l.train[3]};
  const double first = train_step(s, batch, cfg.lr0).combined;
  double last = first;
  int steps = 1;
  for (; steps < 500 && last >= 0.1 * first; ++steps) last = train_step(s, batch, cfg.lr0).combined;
  o.require(last < 0.1 * first, "overfit reached " + fmt("%.3f", last / first) + " of initial");
  o.note("single-batch overfit: " + fmt("%.4g", first) + " -> " + fmt("%.4g", last) + " in " +
         std::to_string(steps) + " steps");
  return o;
}

Outcome precision_equivalence() {
  Outcome o;
  const Learned& l = learned();
  const BcaeModel& model = l.state->model;
  const double h = model.spec().seg_threshold;
  const EncoderSession full(model, Precision::kFull32), half(model, Precision::kHalf16);
  std::vector<MetricsReport> mf, mh;
  std::size_t flips = 0, bad_flips = 0;
  double widest = 0.0;
  for (const auto& w : l.test) {
    const Reconstruction rf = decode(model, full.encode(w));
    const Reconstruction rh = decode(model, half.encode(w));
    const Tensor target = clip_columns(w.values, w.original_horizontal);
    mf.push_back(compute_metrics(rf.values, rf.seg, target, h));
    mh.push_back(compute_metrics(rh.values, rh.seg, target, h));
    for (std::size_t i = 0; i < rf.values.size(); ++i) {
      if ((rf.values[i] != 0.0f) != (rh.values[i] != 0.0f)) {
        ++flips;
        const double dist = std::abs(static_cast<double>(rf.seg[i]) - h);
        widest = std::max(widest, dist);
        if (dist > 1e-3) ++bad_flips;
      }
    }
  }
  const double mae_f = aggregate(mf).mae, mae_h = aggregate(mh).mae;
  o.require(std::abs(mae_f - mae_h) <= 1e-3, "MAE change " + fmt("%.3g", mae_h - mae_f));
  o.require(bad_flips == 0, std::to_string(bad_flips) + " mask flips away from the threshold");
  o.note("MAE full " + fmt("%.6f", mae_f) + ", half " + fmt("%.6f", mae_h) + " (delta " +
         fmt("%.2g", mae_h - mae_f) + "); " + std::to_string(flips) +
         " mask flips, widest |l-0.5| " + fmt("%.2g", widest));
  return o;
}

// ---------------------------------------------------------------- 6 -------

Outcome reconstruction_structure() {
  Outcome o;
  // Horizontal extent 27 is padded to 32 inside the network.
  GeneratorConfig g;
  g.extents = {16, 16, 27};
  g.events = 6;
  g.wedges_per_event = 1;
  g.seed = 8;
  g.target_occupancy.reset();
  g.tracks_min = 3;
  g.tracks_max = 6;
  const auto raw = WedgeGenerator(g).generate();
  const auto wedges = to_log(raw);
  ModelSpec spec = ModelSpec::bcae2d(2, 2, 2);
  spec.trunk_width = 8;
  spec.code_channels = 8;
  spec.wedge_extents = g.extents;
  TrainConfig cfg = TrainConfig::defaults_for(Variant::kBcae2d);
  cfg.epochs = 3;
  cfg.seed = 2;
  const TrainState s = train(spec, wedges, cfg);
  const double h = spec.seg_threshold;

  std::size_t in_gap = 0, mask_mismatch = 0, voxels = 0;
  std::vector<MetricsReport> independent;
  const auto codes = compress(s.model, wedges, Precision::kFull32);
  const auto recon = decompress(s.model, CodeFile::from_codes(s.model, codes));
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const Reconstruction& r = recon[i];
    o.require(r.values.shape() == g.extents && r.seg.shape() == g.extents,
              "reconstruction extents " + to_string(r.values.shape()));
    for (std::size_t v = 0; v < r.values.size(); ++v) {
      const float x = r.values[v];
      if (x > 0.0f && x <= 6.0f) ++in_gap;
      if ((x == 0.0f) != (r.seg[v] <= h)) ++mask_mismatch;
      ++voxels;
    }
    // Metrics computed from scratch on the unpadded grid.
    const LogWedge plain = log_transform(raw[i]);
    independent.push_back(compute_metrics(r.values, r.seg, plain.values, h));
  }
  o.require(in_gap == 0, std::to_string(in_gap) + " values inside (0, 6]");
  o.require(mask_mismatch == 0, std::to_string(mask_mismatch) + " values disagree with the mask");

  std::vector<MetricsReport> per;
  const MetricsReport rep = evaluate(s.model, wedges, std::nullopt, &per);
  const MetricsReport ref = aggregate(independent);
  o.require(rep.counts.voxels == wedges.size() * 16 * 16 * 27,
            "metric voxel count " + std::to_string(rep.counts.voxels));
  o.require(std::abs(rep.mae - ref.mae) <= 1e-12 && rep.counts.true_pos == ref.counts.true_pos &&
                rep.counts.pred_pos == ref.counts.pred_pos &&
                rep.counts.actual_pos == ref.counts.actual_pos,
            "evaluation differs from the unpadded computation");
  o.note(std::to_string(voxels) + " voxels checked, none in (0,6], mask exact; metrics over " +
         std::to_string(rep.counts.voxels) + " unpadded voxels");
  return o;
}

// ---------------------------------------------------------------- 7 -------

Outcome throughput() {
  Outcome o;
  const Shape extents{16, 192, 249};
  std::vector<LogWedge> wedges;
  {
    GeneratorConfig g;
    g.events = 1;
    g.wedges_per_event = 2;
    g.seed = 4;
    for (const auto& r : WedgeGenerator(g).generate()) wedges.push_back(log_transform(r));
  }
  std::map<std::pair<std::string, Precision>, double> rate;
  for (const ModelSpec& spec : {ModelSpec::bcaepp(), ModelSpec::bcaeht()}) {
    BcaeModel model(spec);
    model.initialize(5);
    for (Precision p : {Precision::kFull32, Precision::kHalf16}) {
      BenchConfig cfg;
      cfg.precision = p;
      cfg.batch = 1;
      cfg.warmup = 2;
      cfg.iters = kMinTimedIters;
      cfg.threads = 1;
      const BenchReport r = bench(model, wedges, cfg);
      rate[{to_string(spec.variant), p}] = r.wedges_per_second_mean;
      std::printf("    %-7s %-6s %8.3f +- %.3f wedges/s (encoder %zu params)\n",
                  to_string(spec.variant), to_string(p), r.wedges_per_second_mean,
                  r.wedges_per_second_std, r.encoder_parameters);
      std::fflush(stdout);
    }
  }
  std::string summary;
  for (Precision p : {Precision::kFull32, Precision::kHalf16}) {
    const double ratio = rate[{"bcaeht", p}] / rate[{"bcaepp", p}];
    o.require(ratio >= 1.1, std::string("HT/PP at ") + to_string(p) + " " + fmt("%.2f", ratio));
    summary += std::string("HT/PP ") + to_string(p) + " " + fmt("%.2fx", ratio) + "; ";
  }
  for (const char* v : {"bcaepp", "bcaeht"}) {
    summary += std::string(v) + " half/full " +
               fmt("%.2f", rate[{v, Precision::kHalf16}] / rate[{v, Precision::kFull32}]) + "; ";
  }
  o.note(summary + "batch 1, single thread");
  return o;
}

// ---------------------------------------------------------------- 8 -------

Outcome grid_trend() {
  Outcome o;
  const auto all = to_log(WedgeGenerator(desk_generator(48, 21)).generate(default_threads()));
  const std::vector<LogWedge> train_set(all.begin(), all.begin() + 32);
  const std::vector<LogWedge> test_set(all.begin() + 32, all.end());
  ModelSpec base = ModelSpec::bcae2d();
  base.trunk_width = 32;
  base.code_channels = 32;
  base.wedge_extents = {16, 48, 64};
  TrainConfig cfg = TrainConfig::defaults_for(Variant::kBcae2d);
  cfg.epochs = 30;
  cfg.seed = 6;
  cfg.threads = default_threads();
  const std::vector<std::size_t> ms = {2, 3}, ns = {2, 4};
  // d cannot exceed the smallest m or n of the grid.
  const GridReport rep = grid_search(ms, ns, 2, base, train_set, test_set, cfg);
  std::string summary;
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    const double small = rep.at(mi, 0).metrics.mae, large = rep.at(mi, 1).metrics.mae;
    o.require(large < small, "m=" + std::to_string(ms[mi]) + ": n=4 mae " + fmt("%.4f", large) +
                                 " not below n=2 mae " + fmt("%.4f", small));
    summary += "m=" + std::to_string(ms[mi]) + ": n=2 " + fmt("%.4f", small) + ", n=4 " +
               fmt("%.4f", large) + "; ";
  }
  o.note(summary + "test MAE after " + std::to_string(cfg.epochs) + " epochs");
  return o;
}

// ---------------------------------------------------------------- 9 -------

template <typename Read>
std::size_t rejected_corruptions(const std::string& good, const Read& read, Outcome& o,
                                 const std::string& what) {
  std::vector<std::string> bad;
  bad.push_back("XXXX" + good.substr(4));
  bad.push_back(good.substr(0, 4) + std::string(1, char(99)) + good.substr(5));
  bad.push_back(good + "!");
  bad.push_back("");
  // Every header prefix, then evenly spread cuts through the payload.
  const std::size_t n = good.size();
  for (std::size_t cut = 1; cut < std::min<std::size_t>(n, 96); ++cut) bad.push_back(good.substr(0, cut));
  for (std::size_t k = 1; k < 200; ++k) bad.push_back(good.substr(0, n * k / 200));
  bad.push_back(good.substr(0, n - 1));
  std::size_t rejected = 0;
  for (const auto& b : bad) {
    try {
      std::stringstream in(b);
      read(in);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  o.require(rejected == bad.size(), what + ": " + std::to_string(bad.size() - rejected) +
                                        " corrupt inputs accepted");
  return bad.size();
}

Outcome round_trips() {
  Outcome o;
  GeneratorConfig g;
  g.extents = {16, 16, 27};
  g.events = 6;
  g.wedges_per_event = 1;
  g.seed = 12;
  g.target_occupancy.reset();
  g.tracks_min = 2;
  g.tracks_max = 5;
  const auto raw = WedgeGenerator(g).generate();
  const auto logs = to_log(raw);
  std::size_t corruptions = 0;

  // TPCW, both payload types.
  for (bool as_log : {false, true}) {
    std::stringstream a;
    if (as_log) {
      write_wedges(a, std::span<const LogWedge>(logs));
    } else {
      write_wedges(a, std::span<const RawWedge>(raw));
    }
    const std::string bytes = a.str();
    std::stringstream in(bytes);
    const WedgeFile f = read_wedges(in);
    std::stringstream b;
    if (as_log) {
      const auto back = f.log_wedges();
      write_wedges(b, std::span<const LogWedge>(back));
      bool same = back.size() == logs.size();
      for (std::size_t i = 0; same && i < back.size(); ++i) {
        same = back[i].values.values() == log_transform(raw[i]).values.values();
      }
      o.require(same, "TPCW log values");
    } else {
      write_wedges(b, std::span<const RawWedge>(f.raw));
      o.require(f.raw == raw, "TPCW raw values");
    }
    o.require(b.str() == bytes, std::string("TPCW ") + (as_log ? "log" : "raw") + " bytes");
    corruptions += rejected_corruptions(bytes, [](std::istream& s) { read_wedges(s); }, o, "TPCW");
  }

  ModelSpec spec = ModelSpec::bcae2d(1, 1, 1);
  spec.trunk_width = 8;
  spec.code_channels = 8;
  spec.wedge_extents = g.extents;
  TrainConfig cfg = TrainConfig::defaults_for(Variant::kBcae2d);
  cfg.seed = 9;
  cfg.epochs = 4;
  cfg.threads = 1;

  // BCKP, and resuming from it.
  const TrainState full = train(spec, logs, cfg);
  TrainState part(spec, cfg);
  train(part, logs, 2);
  std::stringstream ck;
  write_checkpoint(ck, part);
  const std::string ck_bytes = ck.str();
  std::stringstream ck_in(ck_bytes);
  TrainState resumed = read_checkpoint(ck_in);
  std::stringstream ck_again;
  write_checkpoint(ck_again, resumed);
  o.require(ck_again.str() == ck_bytes, "BCKP bytes");
  corruptions += rejected_corruptions(ck_bytes, [](std::istream& s) { read_checkpoint(s); }, o,
                                      "BCKP");
  train(resumed, logs, 4);
  std::stringstream full_bytes, resumed_bytes;
  write_checkpoint(full_bytes, full);
  write_checkpoint(resumed_bytes, resumed);
  o.require(resumed.log == full.log, "resumed training log");
  o.require(full_bytes.str() == resumed_bytes.str(), "resumed final state bytes");

  // BCAC.
  const auto codes = compress(full.model, logs, Precision::kHalf16);
  std::stringstream cf;
  write_codes(cf, CodeFile::from_codes(full.model, codes));
  const std::string cf_bytes = cf.str();
  std::stringstream cf_in(cf_bytes);
  const CodeFile back = read_codes(cf_in);
  std::stringstream cf_again;
  write_codes(cf_again, back);
  o.require(cf_again.str() == cf_bytes, "BCAC bytes");
  bool same = back.size() == codes.size();
  for (std::size_t i = 0; same && i < codes.size(); ++i) {
    same = back.code(i).payload == codes[i].payload && back.code(i).shape == codes[i].shape;
  }
  o.require(same, "BCAC payloads");
  corruptions += rejected_corruptions(cf_bytes, [](std::istream& s) { read_codes(s); }, o, "BCAC");

  o.note("TPCW/BCKP/BCAC byte-identical; " + std::to_string(corruptions) +
         " corrupt or truncated inputs rejected; 2+2 epoch resume equals 4 epochs");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

}  // namespace
}  // namespace bcae

int main(int argc, char** argv) {
  using namespace bcae;
  const std::vector<Criterion> all = {
      {1, "shape and ratio exactness", shapes_and_ratios},
      {2, "gradient suite", gradient_suite},
      {3, "loss and balancer algebra", loss_algebra},
      {4, "learnability", learnability},
      {5, "half vs full precision equivalence", precision_equivalence},
      {6, "reconstruction structure", reconstruction_structure},
      {7, "throughput harness", throughput},
      {8, "grid-search trend", grid_trend},
      {9, "round trips and resume", round_trips},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  std::vector<std::string> lines;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::printf("[%d] %s ...\n", c.id, c.title);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& n : out.notes) std::printf("    %s\n", n.c_str());
    char line[256];
    std::snprintf(line, sizeof line, "%s  [%d] %s (%.1f s)", out.pass ? "PASS" : "FAIL", c.id,
                  c.title, secs);
    std::printf("%s\n", line);
    std::fflush(stdout);
    lines.emplace_back(line);
    if (!out.pass) ++failures;
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return failures == 0 ? 0 : 1;
}
