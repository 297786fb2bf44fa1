// Command-line front end: train, quantize/export, eval, analyze, bench.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "pa/bench.hpp"
#include "pa/checkpoint.hpp"
#include "pa/complexity.hpp"
#include "pa/dataset.hpp"
#include "pa/histogram.hpp"
#include "pa/quantized_export.hpp"
#include "pa/trainer.hpp"

namespace {

using namespace pa;
using namespace pa::net;

/// Everything any subcommand may read from the command line.
struct RunConfig {
  std::string arch = "lenet";
  std::string dataset = "mnist";
  std::string data_dir;
  std::string scheme = "pa";
  std::size_t M = 8;
  std::size_t N = 7;
  float lambda_w = 1.0f;
  float lambda_a = 1.0f;
  float lambda_delta = 0.0f;  // 0: derived from the endpoint spacing
  bool downsample_real = false;

  float lr = 0.01f;
  float decay = 0.95f;
  std::string optimizer = "sgd-momentum";
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  std::size_t batch = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool augment = false;
  std::size_t limit_train = 0;
  std::size_t limit_test = 0;

  std::string out;
  std::string metrics;
  std::string resume;
  std::string pretrained;
  std::string checkpoint;
  std::string model;
  std::string histogram_dir;
  std::size_t bins = 41;
  bool verify = false;
  double verify_tolerance = 1e-4;

  std::size_t analyze_M = 4;
  std::size_t analyze_N = 5;
  std::string format = "text";
  bool compare = false;
  std::string gates;
  bool latency = false;
  std::vector<std::size_t> bench_bits{1024, 1u << 16, 1u << 20};
  std::size_t repeats = 15;
};

QuantizationSpec quantization(const RunConfig& c) {
  QuantizationSpec q;
  if (c.scheme == "full") return q;
  if (c.scheme != "pa") throw std::invalid_argument("unknown scheme '" + c.scheme + "'; known: full, pa");
  q.enabled = true;
  q.weight_pieces = c.M;
  q.activation_pieces = c.N;
  q.lambda_w = c.lambda_w;
  q.lambda_a = c.lambda_a;
  if (c.lambda_delta > 0.0f) q.lambda_delta = c.lambda_delta;
  q.downsample_binarized = !c.downsample_real;
  q.validate();
  return q;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.lr = c.lr;
  t.decay = c.decay;
  t.optimizer.kind = parse_optimizer(c.optimizer);
  t.optimizer.momentum = c.momentum;
  t.optimizer.weight_decay = c.weight_decay;
  t.batch_size = c.batch;
  t.epochs = c.epochs;
  t.seed = c.seed;
  t.augment = c.augment;
  t.validate();
  return t;
}

data::Dataset load_split(const RunConfig& c, bool train) {
  if (c.data_dir.empty()) throw std::invalid_argument("--data-dir is required");
  data::Dataset ds = data::load_dataset(c.data_dir, c.dataset, train);
  ds.truncate(train ? c.limit_train : c.limit_test);
  return ds;
}

Tensor calibration_batch(const data::Dataset& ds, std::size_t batch) {
  std::vector<std::size_t> idx(std::min(batch, ds.size()));
  std::iota(idx.begin(), idx.end(), 0);
  return ds.batch(idx);
}

int cmd_train(const RunConfig& c) {
  const QuantizationSpec q = quantization(c);
  const TrainConfig tc = train_config(c);
  const data::Dataset train = load_split(c, true);
  const data::Dataset test = load_split(c, false);
  Network net = build_network(c.arch, q, c.seed);
  Trainer trainer(net, tc);
  if (!c.resume.empty()) {
    trainer.resume(load_checkpoint(c.resume));
    std::cout << "resumed " << c.resume << " at epoch " << trainer.epochs_done() << '\n';
  } else if (!c.pretrained.empty()) {
    load_pretrained(net, load_checkpoint(c.pretrained), calibration_batch(train, c.batch));
    std::cout << "initialised from " << c.pretrained << '\n';
  }
  std::ofstream metrics;
  if (!c.metrics.empty()) {
    metrics.open(c.metrics, c.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!metrics) throw std::runtime_error("cannot open " + c.metrics);
  }
  std::cout << "epoch      loss  train_top1  test_top1  test_top5        lr   seconds\n";
  trainer.fit(train, &test, [&](const EpochMetrics& m) {
    std::cout << std::setw(5) << m.epoch << std::fixed << std::setprecision(4) << std::setw(10) << m.loss
              << std::setw(12) << m.train_top1 << std::setw(11) << m.test_top1 << std::setw(11) << m.test_top5
              << std::setw(10) << m.lr << std::setprecision(1) << std::setw(10) << m.seconds << std::endl;
    if (metrics) metrics << m.to_json().dump() << std::endl;
    if (!c.out.empty()) save_checkpoint(c.out, trainer.checkpoint());
  });
  if (!c.out.empty()) {
    save_checkpoint(c.out, trainer.checkpoint());
    std::cout << "wrote " << c.out << '\n';
  }
  return 0;
}

void print_histograms(Network& net, const RunConfig& c) {
  net.visit([&](Layer& l) {
    QuantizedWeights* w = nullptr;
    if (auto* conv = dynamic_cast<Conv2d*>(&l)) w = &conv->weights();
    if (auto* fc = dynamic_cast<FullyConnected*>(&l)) w = &fc->weights();
    if (!w || !w->quantized()) return;
    const Tensor& real = w->master();
    const Tensor& quant = w->refresh();
    const BinnedHistogram hw = binned_histogram(real, c.bins);
    const ValueHistogram hq = value_histogram(quant);
    std::cout << "\n" << l.name() << ": full-precision weights (" << hw.total() << " values)\n" << render_bars(hw);
    std::cout << l.name() << ": quantized weights\n";
    for (const auto& [v, n] : hq.buckets) std::cout << "  " << std::setw(12) << v << "  " << n << '\n';
    if (!c.histogram_dir.empty()) {
      std::filesystem::create_directories(c.histogram_dir);
      std::ofstream(std::filesystem::path(c.histogram_dir) / (l.name() + ".weights.csv")) << to_csv(hw);
      std::ofstream(std::filesystem::path(c.histogram_dir) / (l.name() + ".quantized.csv")) << to_csv(hq);
    }
  });
}

int cmd_quantize(const RunConfig& c, bool scheme_given) {
  if (c.checkpoint.empty() || c.out.empty()) throw std::invalid_argument("--checkpoint and --out are required");
  const Checkpoint ck = load_checkpoint(c.checkpoint);
  const QuantizationSpec stored = quantization_from_json(ck.meta.at("quantization"));
  Network net = [&] {
    if (stored.enabled) return network_from_checkpoint(ck);
    if (!scheme_given || c.scheme != "pa") {
      throw std::invalid_argument(c.checkpoint + " holds a real-valued model; pass --scheme pa to quantize it");
    }
    Network pa_net = build_network(ck.meta.at("arch").get<std::string>(), quantization(c), c.seed);
    load_pretrained(pa_net, ck, calibration_batch(load_split(c, true), c.batch));
    return pa_net;
  }();
  print_histograms(net, c);
  export_quantized(net, c.out);
  std::cout << "\nwrote " << c.out << '\n';
  return 0;
}

int cmd_eval(const RunConfig& c) {
  if (c.model.empty()) throw std::invalid_argument("--model is required");
  Network net = is_quantized_export(c.model) ? import_quantized(c.model) : network_from_checkpoint(load_checkpoint(c.model));
  const data::Dataset test = load_split(c, false);
  const EvalResult r = evaluate(net, test, c.batch, c.verify);
  std::cout << std::fixed << std::setprecision(4) << "samples " << r.samples << "\ntop1 " << r.top1 << "\ntop5 "
            << r.top5 << "\nloss " << r.loss << '\n';
  if (c.verify) {
    const bool ok = r.verify.checked_layers > 0 && r.verify.max_relative_error <= c.verify_tolerance;
    std::cout << std::scientific << "verify " << (ok ? "PASS" : "FAIL") << " layers " << r.verify.checked_layers
              << " max_rel_err " << r.verify.max_relative_error << '\n';
    if (!ok) return 2;
  }
  return 0;
}

int cmd_analyze(const RunConfig& c) {
  using namespace pa::complexity;
  const Architecture arch = architecture(c.arch);
  const ReportFormat fmt = parse_format(c.format);
  std::string text;
  std::vector<SchemeSpec> specs;
  if (c.compare) {
    for (Scheme s : {Scheme::FullPrecision, Scheme::SingleBinary, Scheme::MultiBinaryABC, Scheme::MultiBinaryPA})
      specs.push_back({s, c.analyze_M, c.analyze_N, true, std::nullopt});
  } else {
    specs.push_back({parse_scheme(c.scheme), c.analyze_M, c.analyze_N, true, c.downsample_real ? std::optional(false) : std::nullopt});
  }
  std::vector<ComplexityReport> reports;
  for (const auto& s : specs) reports.push_back(analyze(arch, s));
  text = c.compare ? emit_comparison(reports, fmt) : emit_report(reports.front(), fmt);
  if (c.latency) {
    const GateTimings gates = c.gates.empty() ? GateTimings{} : load_gate_timings(c.gates);
    std::ostringstream lat;
    lat << "\nlatency per output element (ps)\n"
        << std::left << std::setw(28) << "layer" << std::right << std::setw(12) << "full" << std::setw(12)
        << "xnor" << std::setw(12) << "pa" << std::setw(12) << "pa-general" << std::setw(9) << "speedup\n";
    for (const auto& l : arch.layers) {
      const LatencyEstimate e = latency_estimate(l, specs.back(), gates);
      lat << std::left << std::setw(28) << l.name << std::right << std::fixed << std::setprecision(1) << std::setw(12)
          << e.full_precision << std::setw(12) << e.single_binary << std::setw(12) << e.pa_printed << std::setw(12)
          << e.pa_general << std::setprecision(2) << std::setw(9) << e.speedup_pa << '\n';
    }
    text += lat.str();
  }
  if (c.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(c.out) << text;
    std::cout << "wrote " << c.out << '\n';
  }
  return 0;
}

int cmd_bench(const RunConfig& c) {
  std::vector<pa::bench::Row> rows;
  for (std::size_t bits : c.bench_bits) rows.push_back(pa::bench::time_dot(bits, c.repeats, c.seed));
  rows.push_back(pa::bench::time_conv(8, 16, 8, 3, 4, 5, 5, c.seed));
  rows.push_back(pa::bench::time_conv(32, 16, 32, 3, 4, 5, 3, c.seed));
  const std::string csv = pa::bench::to_csv(rows);
  if (c.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(c.out) << csv;
    std::cout << "wrote " << c.out << '\n';
  }
  return 0;
}

void add_quant_options(CLI::App* app, RunConfig& c) {
  app->add_option("--scheme", c.scheme, "full or pa");
  app->add_option("--M", c.M, "weight pieces (even)")->check(CLI::PositiveNumber);
  app->add_option("--N", c.N, "activation pieces")->check(CLI::PositiveNumber);
  app->add_option("--lambda-w", c.lambda_w, "weight backward slope scale");
  app->add_option("--lambda-a", c.lambda_a, "activation backward slope scale");
  app->add_option("--lambda-delta", c.lambda_delta, "activation backward window beyond v_N");
  app->add_flag("--downsample-real", c.downsample_real, "keep 1x1 downsampling convolutions real-valued");
}

void add_data_options(CLI::App* app, RunConfig& c) {
  app->add_option("--dataset", c.dataset, "mnist or cifar10");
  app->add_option("--data-dir", c.data_dir, "directory with the dataset files");
  app->add_option("--limit-train", c.limit_train, "use only the first K training samples");
  app->add_option("--limit-test", c.limit_test, "use only the first K test samples");
  app->add_option("--batch", c.batch, "batch size")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Piecewise-approximation multi-binary networks"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a network");
  train->add_option("--arch", c.arch, "lenet, resnet20 or tiny");
  add_quant_options(train, c);
  add_data_options(train, c);
  train->add_option("--lr", c.lr, "initial learning rate");
  train->add_option("--decay", c.decay, "per-epoch learning-rate factor");
  train->add_option("--optimizer", c.optimizer, "sgd-momentum or adam");
  train->add_option("--momentum", c.momentum, "SGD momentum");
  train->add_option("--weight-decay", c.weight_decay, "L2 penalty on weights");
  train->add_option("--epochs", c.epochs, "total epochs");
  train->add_flag("--augment", c.augment, "random flip and crop");
  train->add_option("--out", c.out, "checkpoint to write");
  train->add_option("--metrics", c.metrics, "JSON-lines metrics file");
  train->add_option("--resume", c.resume, "continue from a checkpoint");
  train->add_option("--pretrained", c.pretrained, "initialise from a full-precision checkpoint");

  std::vector<CLI::App*> quantizers;
  for (const char* name : {"quantize", "export"}) {
    auto* q = app.add_subcommand(name, "export a quantized model and print weight histograms");
    add_quant_options(q, c);
    add_data_options(q, c);
    q->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->required();
    q->add_option("--out", c.out, "export file")->required();
    q->add_option("--histogram-dir", c.histogram_dir, "also write CSV histograms here");
    q->add_option("--bins", c.bins, "bins for the full-precision histogram");
    quantizers.push_back(q);
  }

  auto* eval = app.add_subcommand("eval", "top-1/top-5 accuracy");
  add_data_options(eval, c);
  eval->add_option("--model", c.model, "checkpoint or quantized export")->required();
  eval->add_flag("--verify", c.verify, "also run the bitwise path and compare");
  eval->add_option("--verify-tolerance", c.verify_tolerance, "max relative error for --verify");

  auto* analyze = app.add_subcommand("analyze", "memory, Flops and latency report");
  analyze->add_option("--arch", c.arch, "lenet, resnet20, resnet18, resnet34 or resnet50");
  analyze->add_option("--scheme", c.scheme, "full, single-binary, abc or pa");
  analyze->add_option("--M", c.analyze_M, "weight bases")->check(CLI::PositiveNumber);
  analyze->add_option("--N", c.analyze_N, "activation bases")->check(CLI::PositiveNumber);
  analyze->add_flag("--downsample-real", c.downsample_real, "keep downsampling layers real-valued");
  analyze->add_option("--format", c.format, "text, json or csv");
  analyze->add_flag("--compare", c.compare, "all schemes side by side");
  analyze->add_flag("--latency", c.latency, "append per-layer latency estimates");
  analyze->add_option("--gates", c.gates, "JSON gate timing overrides");
  analyze->add_option("--out", c.out, "write the report to a file");

  auto* bench = app.add_subcommand("bench", "packed vs naive kernel timings (CSV)");
  bench->add_option("--bits", c.bench_bits, "dot-product lengths");
  bench->add_option("--repeats", c.repeats, "timing repeats (median reported)");
  bench->add_option("--seed", c.seed, "random seed");
  bench->add_option("--out", c.out, "write the CSV to a file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(c);
    for (auto* q : quantizers)
      if (*q) return cmd_quantize(c, q->count("--scheme") > 0);
    if (*eval) return cmd_eval(c);
    if (*analyze) return cmd_analyze(c);
    if (*bench) return cmd_bench(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
