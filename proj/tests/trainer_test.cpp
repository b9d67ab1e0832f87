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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "bcae/error.hpp"
#include "bcae/generator.hpp"
#include "bcae/trainer.hpp"

namespace bcae {
namespace {

TEST(LrSchedule, Values) {
  const TrainConfig c3 = TrainConfig::defaults_for(Variant::kBcaePP);
  EXPECT_DOUBLE_EQ(lr_schedule(0, c3), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(99, c3), 1e-3);
  EXPECT_NEAR(lr_schedule(100, c3), 9.5e-4, 1e-15);
  EXPECT_NEAR(lr_schedule(119, c3), 9.5e-4, 1e-15);
  EXPECT_NEAR(lr_schedule(120, c3), 9.025e-4, 1e-15);
  const TrainConfig c2 = TrainConfig::defaults_for(Variant::kBcae2d);
  EXPECT_DOUBLE_EQ(lr_schedule(49, c2), 1e-3);
  EXPECT_NEAR(lr_schedule(50, c2), 9.5e-4, 1e-15);
  double prev = INFINITY;
  for (std::size_t e = 0; e < 1000; ++e) {
    EXPECT_LE(lr_schedule(e, c3), prev);
    prev = lr_schedule(e, c3);
  }
}

TEST(AdamW, ZeroGradientNoDecayIsIdentity) {
  TrainConfig c;
  c.weight_decay = 0.0;
  std::vector<Tensor> p = {Tensor({3}, {1.0f, -2.0f, 0.5f})};
  const std::vector<Tensor> g = {Tensor({3})};
  AdamState s = AdamState::zeros_like(p);
  for (int i = 0; i < 5; ++i) adamw_step(p, g, s, 1e-3, c);
  EXPECT_EQ(p[0].values(), (std::vector<float>{1.0f, -2.0f, 0.5f}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  TrainConfig c;
  c.weight_decay = 0.0;
  std::vector<Tensor> p = {Tensor({1}, {0.25f})};
  AdamState s = AdamState::zeros_like(p);
  adamw_step(p, std::vector<Tensor>{Tensor({1}, {1.0f})}, s, 1e-3, c);
  EXPECT_NEAR(p[0][0], 0.25 - 1e-3, 1e-8);
  // Direction follows -m_hat.
  std::vector<Tensor> q = {Tensor({1}, {0.0f})};
  AdamState t = AdamState::zeros_like(q);
  for (float g : {-0.3f, -0.1f, -2.0f}) {
    const float before = q[0][0];
    adamw_step(q, std::vector<Tensor>{Tensor({1}, {g})}, t, 1e-2, c);
    EXPECT_GT(q[0][0], before);
  }
}

TEST(AdamW, DecoupledDecayIsExponentialShrink) {
  TrainConfig c;
  c.weight_decay = 0.01;
  std::vector<Tensor> p = {Tensor({1}, {2.0f})};
  AdamState s = AdamState::zeros_like(p);
  const std::vector<Tensor> g = {Tensor({1})};
  double expect = 2.0;
  for (int i = 0; i < 10; ++i) {
    adamw_step(p, g, s, 0.1, c);
    expect *= 1.0 - 0.1 * 0.01;
    EXPECT_NEAR(p[0][0], expect, 1e-6);
  }
}

TEST(AdamW, MismatchedGradientsThrow) {
  std::vector<Tensor> p = {Tensor({2})};
  AdamState s = AdamState::zeros_like(p);
  EXPECT_THROW(adamw_step(p, std::vector<Tensor>{Tensor({3})}, s, 1e-3, TrainConfig{}),
               DimensionError);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = TrainConfig::defaults_for(Variant::kBcae2d);
  c.seed = 77;
  c.epochs = 3;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"decay_factor", 1.5}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"batch_size", 0}}), ConfigError);
}

class TinyTraining : public ::testing::Test {
 protected:
  void SetUp() override {
    GeneratorConfig g;
    g.extents = {16, 16, 16};
    g.tracks_min = 2;
    g.tracks_max = 4;
    g.target_occupancy.reset();
    g.events = 10;
    g.wedges_per_event = 1;
    g.seed = 5;
    for (const auto& w : WedgeGenerator(g).generate()) {
      data.push_back(pad_horizontal(log_transform(w)));
    }
    spec = ModelSpec::bcae2d(1, 1, 1);
    spec.trunk_width = 8;
    spec.code_channels = 8;
    spec.wedge_extents = {16, 16, 16};
    config = TrainConfig::defaults_for(Variant::kBcae2d);
    config.seed = 9;
    config.epochs = 3;
  }

  std::vector<LogWedge> data;
  ModelSpec spec;
  TrainConfig config;
};

TEST_F(TinyTraining, ZeroEpochsKeepsInitialization) {
  config.epochs = 0;
  const TrainState s = train(spec, data, config);
  BcaeModel init(spec);
  init.initialize(config.seed);
  EXPECT_EQ(s.model.model_id(), init.model_id());
  EXPECT_TRUE(s.log.empty());
}

TEST_F(TinyTraining, DeterministicAcrossRunsAndThreads) {
  const TrainState a = train(spec, data, config);
  const TrainState b = train(spec, data, config);
  config.threads = 3;
  const TrainState c = train(spec, data, config);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.log, c.log);
  EXPECT_EQ(a.model.model_id(), c.model.model_id());
  std::string csv = train_log_header();
  EXPECT_EQ(csv, "epoch,lr,c_t,rho_s,rho_r,mae,precision,recall");
  EXPECT_EQ(train_log_row(a.log[0]).substr(0, 2), "1,");
}

TEST_F(TinyTraining, BalancerTraceFollowsRecurrence) {
  config.epochs = 4;
  const TrainState s = train(spec, data, config);
  ASSERT_EQ(s.log.size(), 4u);
  EXPECT_EQ(s.log[0].c, 2000.0);
  for (std::size_t t = 0; t + 1 < s.log.size(); ++t) {
    const auto& a = s.log[t];
    const auto& b = s.log[t + 1];
    EXPECT_NEAR(1.5 * b.c - 0.5 * a.c, a.rho_reg / a.rho_seg,
                1e-9 * std::max(1.0, a.rho_reg / a.rho_seg));
  }
}

TEST_F(TinyTraining, SingleBatchOverfits) {
  TrainState s(spec, config);
  std::vector<const LogWedge*> batch = {&data[0], &data[1], &data[2], &data[3]};
  const double first = train_step(s, batch, 1e-3).combined;
  double last = first;
  for (int step = 1; step < 500 && last >= 0.1 * first; ++step) {
    last = train_step(s, batch, 1e-3).combined;
  }
  EXPECT_LT(last, 0.1 * first);
}

TEST_F(TinyTraining, NonFiniteWeightsAreDiagnosed) {
  TrainState s(spec, config);
  s.model.all_params()[0][3] = NAN;
  std::vector<const LogWedge*> batch = {&data[0]};
  try {
    train_step(s, batch, 1e-3);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.op(), "encoder.in (conv)");
  }
}

TEST_F(TinyTraining, CheckpointRoundTripIsBitExact) {
  const TrainState s = train(spec, data, config);
  std::stringstream buf;
  write_checkpoint(buf, s);
  const TrainState back = read_checkpoint(buf);
  EXPECT_EQ(back.model.spec(), s.model.spec());
  EXPECT_EQ(back.epoch, s.epoch);
  EXPECT_EQ(back.log, s.log);
  EXPECT_EQ(back.adam.step, s.adam.step);
  EXPECT_EQ(back.balancer.c, s.balancer.c);
  for (std::size_t i = 0; i < s.model.all_params().size(); ++i) {
    EXPECT_EQ(back.model.all_params()[i].values(), s.model.all_params()[i].values());
    EXPECT_EQ(back.adam.m[i].values(), s.adam.m[i].values());
    EXPECT_EQ(back.adam.v[i].values(), s.adam.v[i].values());
  }
  std::stringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST_F(TinyTraining, ResumeMatchesUninterruptedRun) {
  config.epochs = 4;
  const TrainState full = train(spec, data, config);
  TrainState part(spec, config);
  train(part, data, 2);
  const auto path = std::filesystem::temp_directory_path() / "bcae_resume_test.bckp";
  save_checkpoint(path, part);
  TrainState resumed = load_checkpoint(path);
  std::filesystem::remove(path);
  train(resumed, data, 4);
  EXPECT_EQ(resumed.log, full.log);
  EXPECT_EQ(resumed.model.model_id(), full.model.model_id());
}

TEST_F(TinyTraining, CorruptCheckpointsAreRejected) {
  config.epochs = 1;
  const TrainState s = train(spec, data, config);
  std::stringstream buf;
  write_checkpoint(buf, s);
  const std::string good = buf.str();
  auto expect_error = [](const std::string& bytes) {
    std::stringstream in(bytes);
    EXPECT_THROW(read_checkpoint(in), FormatError);
  };
  expect_error("XCKP" + good.substr(4));
  expect_error(good.substr(0, good.size() - 3));
  expect_error(good.substr(0, 20));
  expect_error(good + "!");
  // Flip one bit of the first weight ("encoder.in.weight", rank 4); the
  // recorded model id no longer matches.
  std::string tampered = good;
  const std::size_t header_len = static_cast<unsigned char>(good[5]) |
                                 static_cast<unsigned char>(good[6]) << 8 |
                                 static_cast<unsigned char>(good[7]) << 16;
  const std::size_t first_block = 9 + header_len + 4;
  tampered[first_block + 4 + 17 + 4 + 4 * 4 + 1] ^= 0x40;
  expect_error(tampered);
}

TEST_F(TinyTraining, GridReportLayout) {
  config.epochs = 1;
  const std::vector<std::size_t> ms = {1}, ns = {1};
  std::vector<LogWedge> train_set(data.begin(), data.begin() + 8);
  std::vector<LogWedge> test_set(data.begin() + 8, data.end());
  const GridReport r = grid_search(ms, ns, 1, spec, train_set, test_set, config);
  ASSERT_EQ(r.cells.size(), 1u);
  const TrainState single = train(spec, train_set, config);
  EXPECT_EQ(r.at(0, 0).metrics.mae, evaluate(single.model, test_set).mae);
  EXPECT_NE(r.to_csv().find("mae,m,n=1\nmae,1,"), std::string::npos);
  EXPECT_EQ(r.to_json()["cells"].size(), 1u);
  EXPECT_THROW(grid_search(ms, ns, 1, ModelSpec::bcaepp(), train_set, test_set, config),
               ConfigError);
}

TEST(HoldoutSplit, FractionAndDeterminism) {
  const auto a = holdout_split(64, 0.1, 1);
  EXPECT_EQ(a.holdout.size(), 6u);
  EXPECT_EQ(a.train.size(), 58u);
  EXPECT_EQ(holdout_split(64, 0.1, 1).holdout, a.holdout);
  EXPECT_EQ(holdout_split(5, 0.0, 1).holdout.size(), 0u);
  EXPECT_EQ(holdout_split(2, 0.1, 1).holdout.size(), 1u);
}

}  // namespace
}  // namespace bcae
