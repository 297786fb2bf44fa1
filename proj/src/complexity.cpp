#include "pa/complexity.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>
#include <stdexcept>

namespace pa::complexity {

namespace {

LayerDesc conv(std::string name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
               std::size_t in_hw, std::size_t pad) {
  LayerDesc l;
  l.name = std::move(name);
  l.kind = LayerKind::Conv;
  l.in_channels = cin;
  l.out_channels = cout;
  l.kernel = k;
  l.stride = stride;
  l.in_h = l.in_w = in_hw;
  l.out_h = l.out_w = (in_hw + 2 * pad - k) / stride + 1;
  l.bn_channels = cout;
  return l;
}

LayerDesc fully_connected(std::string name, std::size_t in, std::size_t out) {
  LayerDesc l;
  l.name = std::move(name);
  l.kind = LayerKind::FullyConnected;
  l.in_channels = in;
  l.out_channels = out;
  l.bias = true;
  l.last = true;
  return l;
}

Architecture imagenet_resnet(std::string id, bool bottleneck, const std::vector<std::size_t>& blocks) {
  Architecture arch{std::move(id), {}};
  auto stem = conv("conv1", 3, 64, 7, 2, 224, 3);
  stem.first = true;
  arch.layers.push_back(stem);
  std::size_t hw = 56;  // after the 3x3/2 max-pool
  std::size_t cin = 64;
  const std::size_t widths[] = {64, 128, 256, 512};
  for (std::size_t stage = 0; stage < blocks.size(); ++stage) {
    const std::size_t width = widths[stage];
    const std::size_t cout = bottleneck ? 4 * width : width;
    for (std::size_t b = 0; b < blocks[stage]; ++b) {
      const std::size_t stride = (b == 0 && stage > 0) ? 2 : 1;
      const std::string prefix = "layer" + std::to_string(stage + 1) + "." + std::to_string(b) + ".";
      const std::size_t out_hw = hw / stride;
      if (bottleneck) {
        arch.layers.push_back(conv(prefix + "conv1", cin, width, 1, stride, hw, 0));
        arch.layers.push_back(conv(prefix + "conv2", width, width, 3, 1, out_hw, 1));
        arch.layers.push_back(conv(prefix + "conv3", width, cout, 1, 1, out_hw, 0));
      } else {
        arch.layers.push_back(conv(prefix + "conv1", cin, width, 3, stride, hw, 1));
        arch.layers.push_back(conv(prefix + "conv2", width, width, 3, 1, out_hw, 1));
      }
      if (stride != 1 || cin != cout) {
        auto ds = conv(prefix + "downsample", cin, cout, 1, stride, hw, 0);
        ds.downsample = true;
        arch.layers.push_back(ds);
      }
      cin = cout;
      hw = out_hw;
    }
  }
  arch.layers.push_back(fully_connected("fc", cin, 1000));
  return arch;
}

Architecture cifar_resnet20() {
  Architecture arch{"resnet20", {}};
  auto stem = conv("conv1", 3, 16, 3, 1, 32, 1);
  stem.first = true;
  stem.bn_channels = 0;  // the block's pre-activation batch-norm is counted per block
  arch.layers.push_back(stem);
  std::size_t hw = 32, cin = 16;
  const std::size_t widths[] = {16, 32, 64};
  for (std::size_t stage = 0; stage < 3; ++stage) {
    for (std::size_t b = 0; b < 3; ++b) {
      const std::size_t stride = (b == 0 && stage > 0) ? 2 : 1;
      const std::size_t width = widths[stage];
      const std::string prefix = "stage" + std::to_string(stage + 1) + "." + std::to_string(b) + ".";
      auto c1 = conv(prefix + "conv1", cin, width, 3, stride, hw, 1);
      c1.bn_channels = cin;
      auto c2 = conv(prefix + "conv2", width, width, 3, 1, hw / stride, 1);
      c2.bn_channels = width;
      arch.layers.push_back(c1);
      arch.layers.push_back(c2);
      if (stride != 1 || cin != width) {
        auto ds = conv(prefix + "downsample", cin, width, 1, stride, hw, 0);
        ds.downsample = true;
        ds.bn_channels = 0;
        arch.layers.push_back(ds);
      }
      cin = width;
      hw /= stride;
    }
  }
  auto fc = fully_connected("fc", 64, 10);
  fc.bn_channels = 64;  // final pre-activation batch-norm
  arch.layers.push_back(fc);
  return arch;
}

Architecture lenet() {
  Architecture arch{"lenet", {}};
  auto c1 = conv("conv1", 1, 16, 5, 1, 28, 2);
  c1.first = true;
  auto c2 = conv("conv2", 16, 32, 5, 1, 14, 2);
  auto fc1 = fully_connected("fc1", 32 * 7 * 7, 128);
  fc1.last = false;
  fc1.bias = false;
  fc1.bn_channels = 128;
  auto fc2 = fully_connected("fc2", 128, 10);
  arch.layers = {c1, c2, fc1, fc2};
  return arch;
}

}  // namespace

Architecture architecture(std::string_view id) {
  if (id == "resnet18") return imagenet_resnet("resnet18", false, {2, 2, 2, 2});
  if (id == "resnet34") return imagenet_resnet("resnet34", false, {3, 4, 6, 3});
  if (id == "resnet50") return imagenet_resnet("resnet50", true, {3, 4, 6, 3});
  if (id == "resnet20") return cifar_resnet20();
  if (id == "lenet") return lenet();
  std::string known;
  for (const auto& k : known_architectures()) known += (known.empty() ? "" : ", ") + k;
  throw std::invalid_argument("unknown architecture '" + std::string(id) + "'; known: " + known);
}

std::vector<std::string> known_architectures() {
  return {"lenet", "resnet20", "resnet18", "resnet34", "resnet50"};
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::FullPrecision: return "full";
    case Scheme::SingleBinary: return "single-binary";
    case Scheme::MultiBinaryPA: return "pa";
    case Scheme::MultiBinaryABC: return "abc";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "full") return Scheme::FullPrecision;
  if (name == "single-binary" || name == "bireal") return Scheme::SingleBinary;
  if (name == "pa" || name == "multi-binary") return Scheme::MultiBinaryPA;
  if (name == "abc") return Scheme::MultiBinaryABC;
  throw std::invalid_argument("unknown scheme '" + std::string(name) +
                              "'; known: full, single-binary, pa, abc");
}

bool SchemeSpec::binarizes_downsample() const {
  return downsample_binarized.value_or(scheme == Scheme::MultiBinaryPA);
}

bool SchemeSpec::binarizes(const LayerDesc& layer) const {
  if (scheme == Scheme::FullPrecision) return false;
  if (first_last_real && (layer.first || layer.last)) return false;
  if (layer.downsample && !binarizes_downsample()) return false;
  return true;
}

void SchemeSpec::validate() const {
  const bool multi = scheme == Scheme::MultiBinaryPA || scheme == Scheme::MultiBinaryABC;
  if (multi && (weight_bases < 1 || activation_bases < 1)) {
    throw std::invalid_argument("multi-binary schemes need M >= 1 and N >= 1");
  }
}

namespace {

LayerCost layer_cost(const LayerDesc& l, const SchemeSpec& spec) {
  LayerCost c;
  c.name = l.name;
  c.binarized = spec.binarizes(l);
  const double weights = static_cast<double>(l.weight_count());
  const double macs = static_cast<double>(l.macs());
  const double outputs = static_cast<double>(l.output_count());
  const double bias = l.bias ? static_cast<double>(l.out_channels) : 0.0;
  c.memory_bits = 2.0 * static_cast<double>(l.bn_channels) * 32.0;
  if (!c.binarized) {
    c.memory_bits += (weights + bias) * 32.0;
    c.real_multiplications = macs;
  } else if (spec.scheme == Scheme::SingleBinary) {
    c.memory_bits += weights + (static_cast<double>(l.out_channels) + bias) * 32.0;
    c.bitwise_operations = macs;
    c.real_multiplications = outputs;  // per-channel scaling
  } else {
    const double m = static_cast<double>(spec.weight_bases);
    const double n = static_cast<double>(spec.activation_bases);
    c.memory_bits += weights * m + (m + 2.0 * n + bias) * 32.0;
    c.bitwise_operations = m * n * macs;
    c.real_multiplications = m * n * outputs;  // phi_k times each binary conv output
    c.comparisons = n * static_cast<double>(l.input_count());
  }
  c.flops = c.real_multiplications + c.bitwise_operations / 64.0;
  return c;
}

ComplexityReport accumulate(const Architecture& arch, const SchemeSpec& spec) {
  spec.validate();
  ComplexityReport r;
  r.architecture = arch.id;
  r.spec = spec;
  for (const auto& l : arch.layers) {
    r.layers.push_back(layer_cost(l, spec));
    r.memory_bits += r.layers.back().memory_bits;
    r.flops += r.layers.back().flops;
    r.comparisons += r.layers.back().comparisons;
  }
  return r;
}

}  // namespace

ComplexityReport memory_bits(const Architecture& arch, const SchemeSpec& spec) {
  return accumulate(arch, spec);
}

ComplexityReport flops(const Architecture& arch, const SchemeSpec& spec) {
  return accumulate(arch, spec);
}

ComplexityReport analyze(const Architecture& arch, const SchemeSpec& spec) {
  ComplexityReport r = accumulate(arch, spec);
  const ComplexityReport full = accumulate(arch, SchemeSpec{});
  r.full_precision_memory_bits = full.memory_bits;
  r.full_precision_flops = full.flops;
  r.memory_saving = r.memory_bits > 0.0 ? full.memory_bits / r.memory_bits : 1.0;
  r.speedup = r.flops > 0.0 ? full.flops / r.flops : 1.0;
  return r;
}

void GateTimings::validate() const {
  const double values[] = {xnor_delay, and_delay, xnor_area, and_area, xnor_power,
                           and_power,  mul_delay, add_delay, com_delay, adder_stage_delay};
  for (double v : values)
    if (!(v > 0.0)) throw std::invalid_argument("gate timings, areas and powers must be positive");
  if (pop_delay && !(*pop_delay > 0.0)) throw std::invalid_argument("popcount delay must be positive");
}

double GateTimings::popcount_delay(std::size_t fan_in) const {
  if (pop_delay) return *pop_delay;
  const double levels = fan_in > 1 ? std::ceil(std::log2(static_cast<double>(fan_in))) : 1.0;
  return levels * adder_stage_delay;
}

GateTimings load_gate_timings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gate timing file " + path);
  const auto j = nlohmann::json::parse(in);
  GateTimings g;
  auto read = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  read("xnor_delay", g.xnor_delay);
  read("and_delay", g.and_delay);
  read("xnor_area", g.xnor_area);
  read("and_area", g.and_area);
  read("xnor_power", g.xnor_power);
  read("and_power", g.and_power);
  read("mul_delay", g.mul_delay);
  read("add_delay", g.add_delay);
  read("com_delay", g.com_delay);
  read("adder_stage_delay", g.adder_stage_delay);
  if (j.contains("pop_delay")) g.pop_delay = j.at("pop_delay").get<double>();
  g.validate();
  return g;
}

LatencyEstimate latency_estimate(const LayerDesc& layer, const SchemeSpec& spec,
                                 const GateTimings& gates) {
  gates.validate();
  spec.validate();
  LatencyEstimate e;
  e.fan_in = layer.fan_in();
  const double k = static_cast<double>(e.fan_in);
  const double pop = gates.popcount_delay(e.fan_in);
  const double mn = static_cast<double>(spec.weight_bases * spec.activation_bases);
  e.full_precision = k * gates.mul_delay + (k - 1.0) * gates.add_delay;
  e.single_binary = k * (gates.xnor_delay + pop) + gates.mul_delay;
  e.pa_printed = k * (gates.and_delay + pop) + 5.0 * gates.mul_delay + 4.0 * gates.add_delay +
                 gates.com_delay;
  e.pa_general = k * (gates.and_delay + pop) + mn * gates.mul_delay + (mn - 1.0) * gates.add_delay +
                 gates.com_delay;
  e.speedup_single_binary = e.full_precision / e.single_binary;
  e.speedup_pa = e.full_precision / e.pa_printed;
  e.speedup_pa_asymptotic = (gates.mul_delay + gates.add_delay) / (gates.and_delay + pop);
  e.speedup_xnor_asymptotic = (gates.mul_delay + gates.add_delay) / (gates.xnor_delay + pop);
  return e;
}

}  // namespace pa::complexity
