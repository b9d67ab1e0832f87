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

// bcae: generate, train, compress, decompress, evaluate, bench, grid.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcae/codec.hpp"
#include "bcae/error.hpp"
#include "bcae/generator.hpp"
#include "bcae/metrics.hpp"
#include "bcae/trainer.hpp"
#include "bcae/wedge_io.hpp"

namespace {

using namespace bcae;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string extension(const std::string& path) {
  const auto dot = path.rfind('.');
  return dot == std::string::npos ? std::string{} : path.substr(dot + 1);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
}

std::vector<LogWedge> padded(std::vector<LogWedge> wedges) {
  for (auto& w : wedges) {
    if (!w.padded) w = pad_horizontal(w);
  }
  return wedges;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> events;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> extents;
  std::size_t threads = 0;
};

int run_generate(const GenerateArgs& a) {
  GeneratorConfig c = a.config.empty() ? GeneratorConfig{}
                                       : GeneratorConfig::from_json(read_json(a.config));
  if (a.events) c.events = *a.events;
  if (a.seed) c.seed = *a.seed;
  if (!a.extents.empty()) c.extents = a.extents;
  const WedgeGenerator gen(c);
  const auto wedges = gen.generate(a.threads ? a.threads : default_threads());
  write_wedge_file(a.out, std::span<const RawWedge>(wedges), c.extents);
  double occ = 0.0;
  for (const auto& w : wedges) occ += occupancy(w);
  if (!wedges.empty()) occ /= static_cast<double>(wedges.size());
  std::printf("wrote %zu wedges %s to %s; mean occupancy %.6f; tracks per wedge %zu-%zu\n",
              wedges.size(), to_string(c.extents).c_str(), a.out.c_str(), occ,
              gen.tracks_min(), gen.tracks_max());
  return kExitOk;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string model_config;
  std::string variant = "bcae2d";
  std::string train_config;
  std::string resume;
  std::string log;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::size_t checkpoint_every = 0;
};

ModelSpec model_for_data(const std::string& model_config, const std::string& variant,
                         const Shape& data_extents) {
  if (model_config.empty()) {
    ModelSpec s = ModelSpec::defaults_for(parse_variant(variant));
    s.wedge_extents = data_extents;
    s.validate();
    return s;
  }
  const nlohmann::json j = read_json(model_config);
  nlohmann::json merged = j;
  if (!j.contains("wedge_extents")) merged["wedge_extents"] = data_extents;
  ModelSpec s = ModelSpec::from_json(merged);
  if (s.wedge_extents != data_extents) {
    throw ConfigError("model expects wedges " + to_string(s.wedge_extents) +
                      " but the data holds " + to_string(data_extents));
  }
  return s;
}

int run_train(const TrainArgs& a) {
  const WedgeFile file = read_wedge_file(a.data);
  const std::vector<LogWedge> data = padded(file.log_wedges());

  std::optional<TrainState> state;
  if (!a.resume.empty()) {
    state.emplace(load_checkpoint(a.resume));
    if (state->model.spec().wedge_extents != file.extents) {
      throw ConfigError("checkpoint model expects wedges " +
                        to_string(state->model.spec().wedge_extents) + ", data holds " +
                        to_string(file.extents));
    }
    if (!a.model_config.empty() &&
        !(model_for_data(a.model_config, a.variant, file.extents) == state->model.spec())) {
      throw ConfigError("model config does not match the checkpoint being resumed");
    }
    if (a.epochs) state->config.epochs = *a.epochs;
    if (a.threads) state->config.threads = *a.threads;
  } else {
    const ModelSpec spec = model_for_data(a.model_config, a.variant, file.extents);
    TrainConfig cfg = a.train_config.empty() ? TrainConfig::defaults_for(spec.variant)
                                             : TrainConfig::from_json(read_json(a.train_config));
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;
    cfg.validate();
    state.emplace(spec, cfg);
  }

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw Error("cannot open " + a.log + " for writing");
    log << train_log_header() << "\n";
    for (const auto& r : state->log) log << train_log_row(r) << "\n";
  }
  std::printf("%s\n", train_log_header().c_str());
  train(*state, data, state->config.epochs, [&](const EpochLog& r, const TrainState& s) {
    std::printf("%s\n", train_log_row(r).c_str());
    std::fflush(stdout);
    if (log.is_open()) log << train_log_row(r) << std::endl;
    if (a.checkpoint_every && r.epoch % a.checkpoint_every == 0) save_checkpoint(a.out, s);
  });
  save_checkpoint(a.out, *state);
  std::printf("saved checkpoint %s (model %s, epoch %zu)\n", a.out.c_str(),
              state->model.model_id().c_str(), state->epoch);
  return kExitOk;
}

// --- compress / decompress ------------------------------------------------

struct CompressArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
  std::string precision = "full";
  std::size_t batch = 1;
  std::size_t threads = 0;
};

int run_compress(const CompressArgs& a) {
  const TrainState state = load_checkpoint(a.checkpoint);
  const BcaeModel& model = state.model;
  const WedgeFile file = read_wedge_file(a.in);
  if (file.size() > 0 && file.extents != model.spec().wedge_extents) {
    throw ConfigError("wedges " + to_string(file.extents) + " do not match the model's " +
                      to_string(model.spec().wedge_extents));
  }
  const std::vector<LogWedge> wedges = padded(file.log_wedges());
  const Precision precision = parse_precision(a.precision);
  const std::size_t threads = a.threads ? a.threads : default_threads();

  std::vector<Code> codes;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t start = 0; start < wedges.size(); start += a.batch) {
    const std::size_t n = std::min(a.batch, wedges.size() - start);
    auto part = compress(model, std::span(wedges).subspan(start, n), precision, threads);
    for (auto& c : part) codes.push_back(std::move(c));
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  write_code_file(a.out, CodeFile::from_codes(model, codes));
  const double ratio =
      compression_ratio(model.spec().wedge_extents, model.spec().code_shape());
  std::printf("compressed %zu wedges with %s precision; code %s; compression ratio %.3f; "
              "%.1f wedges/s\n",
              codes.size(), to_string(precision), to_string(model.spec().code_shape()).c_str(),
              ratio, codes.empty() ? 0.0 : static_cast<double>(codes.size()) / dt.count());
  return kExitOk;
}

struct DecompressArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
  std::optional<double> threshold;
  std::size_t threads = 0;
};

int run_decompress(const DecompressArgs& a) {
  const TrainState state = load_checkpoint(a.checkpoint);
  const CodeFile codes = read_code_file(a.in);
  if (a.threshold && !(*a.threshold > 0.0 && *a.threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  const auto recs =
      decompress(state.model, codes, a.threshold, a.threads ? a.threads : default_threads());
  std::vector<LogWedge> out;
  double occ = 0.0;
  for (const auto& r : recs) {
    LogWedge w;
    w.values = r.values;
    w.original_horizontal = r.values.dim(2);
    occ += occupancy(w.values);
    out.push_back(std::move(w));
  }
  write_wedge_file(a.out, std::span<const LogWedge>(out), codes.original_extents);
  std::printf("decompressed %zu wedges %s; mean occupancy %.6f\n", out.size(),
              to_string(codes.original_extents).c_str(),
              out.empty() ? 0.0 : occ / static_cast<double>(out.size()));
  return kExitOk;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string reconstruction;
  std::string data;
  std::string out;
  std::optional<double> threshold;
  std::string precision = "full";
  std::size_t threads = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.checkpoint.empty() == a.reconstruction.empty()) {
    throw ConfigError("evaluate needs exactly one of --checkpoint or --reconstruction");
  }
  const WedgeFile truth_file = read_wedge_file(a.data);
  const std::vector<LogWedge> truth = truth_file.log_wedges();
  std::vector<MetricsReport> per;
  std::size_t enc_params = 0, dec_params = 0;
  double h = a.threshold.value_or(0.5);

  if (!a.checkpoint.empty()) {
    const TrainState state = load_checkpoint(a.checkpoint);
    const BcaeModel& model = state.model;
    h = a.threshold.value_or(model.spec().seg_threshold);
    const std::size_t threads = a.threads ? a.threads : default_threads();
    const std::vector<LogWedge> inputs = padded(truth);
    const auto codes = compress(model, inputs, parse_precision(a.precision), threads);
    const auto recs = decompress(model, CodeFile::from_codes(model, codes), h, threads);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      per.push_back(compute_metrics(recs[i].values, recs[i].seg, truth[i].values, h));
    }
    enc_params = model.parameter_count(Head::kEncoder);
    dec_params = model.parameter_count(Head::kSegmentation) +
                 model.parameter_count(Head::kRegression);
  } else {
    // A stored reconstruction has no segmentation output; its nonzero set
    // stands in for seg > h.
    const std::vector<LogWedge> recon = read_wedge_file(a.reconstruction).log_wedges();
    if (recon.size() != truth.size()) {
      throw ConfigError("reconstruction holds " + std::to_string(recon.size()) +
                        " wedges, data holds " + std::to_string(truth.size()));
    }
    for (std::size_t i = 0; i < recon.size(); ++i) {
      Tensor seg(recon[i].values.shape());
      for (std::size_t k = 0; k < seg.size(); ++k) seg[k] = recon[i].values[k] > 0 ? 1.0f : 0.0f;
      per.push_back(compute_metrics(recon[i].values, seg, truth[i].values, h));
    }
  }
  const MetricsReport total = aggregate(per);

  std::ostringstream csv;
  csv << metrics_csv_header() << "\n";
  for (std::size_t i = 0; i < per.size(); ++i) {
    csv << metrics_csv_row("wedge" + std::to_string(i), per[i]) << "\n";
  }
  csv << metrics_csv_row("aggregate", total) << "\n";

  nlohmann::json j;
  j["wedges"] = nlohmann::json::array();
  for (const auto& r : per) j["wedges"].push_back(to_json(r));
  j["aggregate"] = to_json(total);
  j["threshold"] = h;
  j["encoder_parameters"] = enc_params;
  j["decoder_parameters"] = dec_params;

  if (!a.out.empty()) {
    const std::string ext = extension(a.out);
    if (ext == "json") {
      write_text(a.out, j.dump(2) + "\n");
    } else if (ext == "csv") {
      write_text(a.out, csv.str());
    } else {
      throw ConfigError("--out must end in .csv or .json");
    }
  }
  std::printf("%s\n%s\n", metrics_csv_header().c_str(),
              metrics_csv_row("aggregate", total).c_str());
  if (enc_params) {
    std::printf("encoder parameters %zu, decoder parameters %zu\n", enc_params, dec_params);
  }
  return kExitOk;
}

// --- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint;
  std::string variant;
  std::string precision = "full";
  std::size_t batch = 1;
  std::size_t warmup = 2;
  std::size_t iters = 10;
  std::string wedge_source = "synthetic";
  std::size_t threads = 0;
  bool full_pipeline = false;
  std::string out;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  if (a.checkpoint.empty() == a.variant.empty()) {
    throw ConfigError("bench needs exactly one of --checkpoint or --variant");
  }
  std::optional<BcaeModel> model;
  if (!a.checkpoint.empty()) {
    model.emplace(load_checkpoint(a.checkpoint).model);
  } else {
    model.emplace(ModelSpec::defaults_for(parse_variant(a.variant)));
    model->initialize(a.seed);
  }
  std::vector<LogWedge> wedges;
  if (a.wedge_source == "synthetic") {
    GeneratorConfig g;
    g.extents = model->spec().wedge_extents;
    g.seed = a.seed;
    g.events = 1;
    g.wedges_per_event = std::min<std::size_t>(a.batch, kWedgesPerEvent);
    for (const auto& w : WedgeGenerator(g).generate()) {
      wedges.push_back(pad_horizontal(log_transform(w)));
    }
  } else {
    wedges = padded(read_wedge_file(a.wedge_source).log_wedges());
  }
  BenchConfig cfg;
  cfg.precision = parse_precision(a.precision);
  cfg.batch = a.batch;
  cfg.warmup = a.warmup;
  cfg.iters = a.iters;
  cfg.threads = a.threads ? a.threads : default_threads();
  cfg.full_pipeline = a.full_pipeline;
  const BenchReport rep = bench(*model, wedges, cfg);
  std::printf("%s %s batch %zu threads %zu: %.2f +- %.2f wedges/s over %zu iterations "
              "(encoder parameters %zu)\n",
              rep.variant.c_str(), to_string(rep.precision), rep.batch, rep.threads,
              rep.wedges_per_second_mean, rep.wedges_per_second_std, rep.iters,
              rep.encoder_parameters);
  if (!a.out.empty()) write_text(a.out, rep.to_json().dump(2) + "\n");
  return kExitOk;
}

// --- grid -----------------------------------------------------------------

struct GridArgs {
  std::string data;
  std::string test_data;
  std::vector<std::size_t> ms{2, 3};
  std::vector<std::size_t> ns{2, 4};
  std::size_t d = 2;
  std::string model_config;
  std::string train_config;
  std::optional<std::size_t> epochs;
  std::string out;
};

int run_grid(const GridArgs& a) {
  const WedgeFile file = read_wedge_file(a.data);
  const std::vector<LogWedge> train_set = padded(file.log_wedges());
  std::vector<LogWedge> test_set;
  if (!a.test_data.empty()) {
    test_set = padded(read_wedge_file(a.test_data).log_wedges());
  }
  const ModelSpec base = model_for_data(a.model_config, "bcae2d", file.extents);
  TrainConfig cfg = a.train_config.empty() ? TrainConfig::defaults_for(Variant::kBcae2d)
                                           : TrainConfig::from_json(read_json(a.train_config));
  if (a.epochs) cfg.epochs = *a.epochs;
  const GridReport rep = grid_search(a.ms, a.ns, a.d, base, train_set, test_set, cfg);
  std::printf("%s", rep.to_csv().c_str());
  if (!a.out.empty()) {
    const std::string ext = extension(a.out);
    if (ext == "json") {
      write_text(a.out, rep.to_json().dump(2) + "\n");
    } else if (ext == "csv") {
      write_text(a.out, rep.to_csv());
    } else {
      throw ConfigError("--out must end in .csv or .json");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural lossy compression for sparse TPC wedge data"};
  app.require_subcommand(1);
  int status = kExitOk;

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write synthetic wedges to a TPCW file");
  g->add_option("--config", gen.config, "Generator JSON config");
  g->add_option("--out", gen.out, "Output wedge file")->required();
  g->add_option("--events", gen.events, "Override the event count");
  g->add_option("--seed", gen.seed, "Override the seed");
  g->add_option("--extents", gen.extents, "Override extents R A H")->expected(3);
  g->add_option("--threads", gen.threads, "Worker threads");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--data", tr.data, "Training wedge file")->required();
  t->add_option("--out", tr.out, "Checkpoint to write")->required();
  t->add_option("--model-config", tr.model_config, "ModelSpec JSON");
  t->add_option("--variant", tr.variant, "bcae2d, bcaepp or bcaeht")
      ->check(CLI::IsMember({"bcae2d", "bcaepp", "bcaeht"}));
  t->add_option("--config", tr.train_config, "TrainConfig JSON");
  t->add_option("--resume", tr.resume, "Continue from this checkpoint");
  t->add_option("--epochs", tr.epochs, "Train until this epoch");
  t->add_option("--seed", tr.seed, "Override the seed");
  t->add_option("--threads", tr.threads, "Threads per batch");
  t->add_option("--log", tr.log, "Training log CSV");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Save every N epochs");

  CompressArgs co;
  auto* c = app.add_subcommand("compress", "Encode wedges into a BCAC code file");
  c->add_option("--checkpoint", co.checkpoint)->required();
  c->add_option("--in", co.in, "Wedge file")->required();
  c->add_option("--out", co.out, "Code file")->required();
  c->add_option("--precision", co.precision)->check(CLI::IsMember({"full", "half"}));
  c->add_option("--batch", co.batch)->check(CLI::PositiveNumber);
  c->add_option("--threads", co.threads, "Worker threads");

  DecompressArgs de;
  auto* d = app.add_subcommand("decompress", "Decode a BCAC file into log-ADC wedges");
  d->add_option("--checkpoint", de.checkpoint)->required();
  d->add_option("--in", de.in, "Code file")->required();
  d->add_option("--out", de.out, "Wedge file (f32 log-ADC)")->required();
  d->add_option("--threshold", de.threshold, "Segmentation threshold h");
  d->add_option("--threads", de.threads, "Worker threads");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Reconstruction metrics per wedge and aggregate");
  e->add_option("--checkpoint", ev.checkpoint, "Model to run through the codec");
  e->add_option("--reconstruction", ev.reconstruction, "Already decompressed wedge file");
  e->add_option("--data", ev.data, "Ground-truth wedge file")->required();
  e->add_option("--out", ev.out, "report.csv or report.json");
  e->add_option("--threshold", ev.threshold, "Segmentation threshold h");
  e->add_option("--precision", ev.precision)->check(CLI::IsMember({"full", "half"}));
  e->add_option("--threads", ev.threads, "Worker threads");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Encoder throughput in wedges per second");
  b->add_option("--checkpoint", be.checkpoint);
  b->add_option("--variant", be.variant, "Benchmark a seeded, untrained model")
      ->check(CLI::IsMember({"bcae2d", "bcaepp", "bcaeht"}));
  b->add_option("--precision", be.precision)->check(CLI::IsMember({"full", "half"}));
  b->add_option("--batch", be.batch)->check(CLI::PositiveNumber);
  b->add_option("--warmup", be.warmup);
  b->add_option("--iters", be.iters);
  b->add_option("--wedge-source", be.wedge_source, "'synthetic' or a wedge file");
  b->add_option("--threads", be.threads, "Worker threads");
  b->add_flag("--full-pipeline", be.full_pipeline, "Also time both decoders");
  b->add_option("--out", be.out, "JSON report");
  b->add_option("--seed", be.seed);

  GridArgs gr;
  auto* s = app.add_subcommand("grid", "Grid search over encoder/decoder depth");
  s->add_option("--data", gr.data, "Training wedge file")->required();
  s->add_option("--test-data", gr.test_data, "Evaluation wedge file");
  s->add_option("--ms", gr.ms, "Encoder block counts");
  s->add_option("--ns", gr.ns, "Decoder block counts");
  s->add_option("--d", gr.d, "Down/upsampling steps");
  s->add_option("--model-config", gr.model_config, "Base ModelSpec JSON");
  s->add_option("--config", gr.train_config, "TrainConfig JSON");
  s->add_option("--epochs", gr.epochs, "Epochs per cell");
  s->add_option("--out", gr.out, "report.csv or report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) status = run_generate(gen);
    if (*t) status = run_train(tr);
    if (*c) status = run_compress(co);
    if (*d) status = run_decompress(de);
    if (*e) status = run_evaluate(ev);
    if (*b) status = run_bench(be);
    if (*s) status = run_grid(gr);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const NumericError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return status;
}
