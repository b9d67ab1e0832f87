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

#include <cstdlib>
#include <sstream>

#include "bcae/codec.hpp"
#include "bcae/error.hpp"
#include "bcae/generator.hpp"
#include "bcae/metrics.hpp"

namespace bcae {
namespace {

class CodecTest : public ::testing::Test {
 protected:
  void SetUp() override {
    spec = ModelSpec::bcae2d(2, 2, 2);
    spec.trunk_width = 8;
    spec.code_channels = 8;
    spec.wedge_extents = {16, 16, 27};
    model.emplace(spec);
    model->initialize(4);
    GeneratorConfig g;
    g.extents = spec.wedge_extents;
    g.events = 1;
    g.wedges_per_event = 5;
    g.seed = 8;
    for (const auto& w : WedgeGenerator(g).generate()) wedges.push_back(log_transform(w));
  }

  ModelSpec spec;
  std::optional<BcaeModel> model;
  std::vector<LogWedge> wedges;
};

TEST_F(CodecTest, CodeFileRoundTripIsBitExact) {
  const auto codes = compress(*model, wedges, Precision::kFull32);
  const CodeFile f = CodeFile::from_codes(*model, codes);
  std::stringstream s;
  write_codes(s, f);
  const std::string bytes = s.str();
  const std::size_t payload = 5 * element_count(spec.code_shape()) * 2;
  const std::size_t header = 4 + 1 + 1 + 16 + 8 + (1 + 3 * 4) + (1 + 3 * 4) + 4;
  EXPECT_EQ(bytes.size(), header + payload);
  const CodeFile back = read_codes(s);
  EXPECT_EQ(back.model_id, f.model_id);
  EXPECT_EQ(back.spec_digest, spec.digest());
  EXPECT_EQ(back.original_extents, spec.wedge_extents);
  EXPECT_EQ(back.code_shape, spec.code_shape());
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t k = 0; k < back.payloads[i].size(); ++k) {
      EXPECT_EQ(back.payloads[i][k].bits, codes[i].payload[k].bits);
    }
  }
}

TEST_F(CodecTest, CorruptCodeFilesAreRejected) {
  const CodeFile f = CodeFile::from_codes(*model, compress(*model, wedges, Precision::kFull32));
  std::stringstream s;
  write_codes(s, f);
  const std::string good = s.str();
  auto rejects = [](const std::string& bytes, const std::string& needle) {
    std::stringstream in(bytes);
    try {
      read_codes(in);
      ADD_FAILURE() << "accepted corrupt file";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  rejects("BCAX" + good.substr(4), "bad magic");
  rejects(good.substr(0, good.size() - 1), "truncated payload");
  rejects(good.substr(0, 12), "truncated header");
  rejects(good + "xx", "trailing bytes");
}

TEST_F(CodecTest, EmptyCodeFile) {
  const CodeFile f = CodeFile::from_codes(*model, {});
  std::stringstream s;
  write_codes(s, f);
  EXPECT_EQ(read_codes(s).size(), 0u);
}

TEST_F(CodecTest, DecompressChecksTheModel) {
  const CodeFile f = CodeFile::from_codes(*model, compress(*model, wedges, Precision::kFull32));
  BcaeModel other(spec);
  other.initialize(5);
  EXPECT_THROW(decompress(other, f), FormatError);
  ModelSpec wider = spec;
  wider.seg_threshold = 0.6;
  BcaeModel third(wider);
  EXPECT_THROW(decompress(third, f), FormatError);
}

TEST_F(CodecTest, ThreadedCompressionMatchesSerial) {
  const auto a = compress(*model, wedges, Precision::kHalf16, 1);
  const auto b = compress(*model, wedges, Precision::kHalf16, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].payload.size(); ++k) {
      ASSERT_EQ(a[i].payload[k].bits, b[i].payload[k].bits);
    }
  }
  const CodeFile f = CodeFile::from_codes(*model, a);
  const auto r1 = decompress(*model, f, std::nullopt, 1);
  const auto r3 = decompress(*model, f, std::nullopt, 3);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(r1[i].values.values(), r3[i].values.values());
    EXPECT_EQ(r1[i].values.shape(), spec.wedge_extents);
  }
}

TEST_F(CodecTest, ThresholdMonotoneOccupancy) {
  const CodeFile f = CodeFile::from_codes(*model, compress(*model, wedges, Precision::kFull32));
  const auto lo = decompress(*model, f, 0.5);
  const auto hi = decompress(*model, f, 0.99);
  for (std::size_t i = 0; i < lo.size(); ++i) {
    EXPECT_LE(occupancy(hi[i].values), occupancy(lo[i].values));
    for (float v : lo[i].values.values()) EXPECT_TRUE(v == 0.0f || v > 6.0f);
  }
}

TEST_F(CodecTest, BenchContract) {
  BenchConfig cfg;
  cfg.iters = 9;
  EXPECT_THROW(bench(*model, wedges, cfg), ConfigError);
  cfg.iters = 10;
  cfg.batch = 3;
  const BenchReport r = bench(*model, wedges, cfg);
  EXPECT_GT(r.wedges_per_second_mean, 0.0);
  EXPECT_GE(r.wedges_per_second_std, 0.0);
  EXPECT_EQ(r.encoder_parameters, count_parameters(model->graph(Head::kEncoder)));
  EXPECT_EQ(r.to_json()["timed_iters"], 10);
  EXPECT_EQ(r.to_json()["batch"], 3);
}

TEST_F(CodecTest, BenchIsStationary) {
  BenchConfig cfg;
  cfg.batch = 4;
  cfg.warmup = 5;
  cfg.iters = 40;
  const double a = bench(*model, wedges, cfg).wedges_per_second_mean;
  cfg.iters = 80;
  const double b = bench(*model, wedges, cfg).wedges_per_second_mean;
  EXPECT_LT(std::abs(b - a) / a, 0.1);
}

TEST(Threads, EnvironmentOverride) {
  ::setenv("BCAE_NUM_THREADS", "3", 1);
  EXPECT_EQ(default_threads(), 3u);
  ::setenv("BCAE_NUM_THREADS", "zero", 1);
  EXPECT_THROW(default_threads(), ConfigError);
  ::unsetenv("BCAE_NUM_THREADS");
  EXPECT_GE(default_threads(), 1u);
}

}  // namespace
}  // namespace bcae
