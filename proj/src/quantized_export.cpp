#include "pa/quantized_export.hpp"

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "pa/binary_io.hpp"
#include "pa/checkpoint.hpp"

namespace pa::net {

namespace {

enum RecordType : std::uint32_t { kBinarized = 0, kReal = 1, kActivation = 2 };

void write_shape(io::Writer& w, const Shape& s) {
  for (std::size_t d : s) w.u32(static_cast<std::uint32_t>(d));
}

Shape read_shape(io::Reader& r) {
  Shape s{};
  for (auto& d : s) d = r.u32();
  return s;
}

void write_binarized(io::Writer& w, const std::string& name, QuantizedWeights& q) {
  q.refresh();
  const WeightPiecewise& wp = q.piecewise();
  const auto planes = q.planes();
  w.u32(kBinarized);
  w.string(name);
  write_shape(w, q.master().shape());
  w.u32(static_cast<std::uint32_t>(wp.pieces()));
  w.floats(wp.u);
  w.floats(wp.alpha);
  w.f32(wp.sigma);
  w.f32(q.config()->lambda);
  const std::size_t words = planes.empty() ? 0 : planes.front().words().size();
  w.u32(static_cast<std::uint32_t>(words));
  for (const auto& p : planes)
    for (std::uint64_t word : p.words()) w.u64(word);
}

/// Weight holders by tensor name, for conv and fully-connected layers.
std::map<std::string, QuantizedWeights*> weight_holders(Network& net) {
  std::map<std::string, QuantizedWeights*> out;
  net.visit([&](Layer& l) {
    if (auto* c = dynamic_cast<Conv2d*>(&l)) out[l.name() + ".weight"] = &c->weights();
    if (auto* f = dynamic_cast<FullyConnected*>(&l)) out[l.name() + ".weight"] = &f->weights();
  });
  return out;
}

std::map<std::string, PaActivation*> activations(Network& net) {
  std::map<std::string, PaActivation*> out;
  net.visit([&](Layer& l) {
    if (auto* a = dynamic_cast<PaActivation*>(&l)) out[l.name()] = a;
  });
  return out;
}

}  // namespace

void export_quantized(Network& net, const std::string& path) {
  if (!net.quantization().enabled) {
    throw std::invalid_argument("network '" + net.arch() + "' is real-valued; choose a PA scheme to export");
  }
  const auto holders = weight_holders(net);
  const auto acts = activations(net);
  for (const auto& [name, a] : acts)
    if (!a->calibrated()) throw std::invalid_argument("activation quantizer " + name + " is not calibrated");

  io::Writer w;
  w.bytes("PAQ1", 4);
  w.u32(kExportVersion);
  nlohmann::json meta{{"arch", net.arch()}, {"quantization", to_json(net.quantization())}};
  w.string(meta.dump());

  std::vector<TensorRef> tensors = net.tensors();
  std::size_t records = 0;
  io::Writer body;
  for (const auto& t : tensors) {
    if (auto it = holders.find(t.name); it != holders.end() && it->second->quantized()) {
      write_binarized(body, t.name, *it->second);
      ++records;
      continue;
    }
    if (t.role == TensorRole::ActivationBeta || t.role == TensorRole::ActivationEndpoint) continue;
    if (t.name.ends_with(".config")) {
      const std::string layer = t.name.substr(0, t.name.size() - 7);
      const ActivationQuantizerState s = acts.at(layer)->state();
      body.u32(kActivation);
      body.string(layer);
      body.u32(static_cast<std::uint32_t>(s.pieces()));
      body.floats(s.v);
      body.floats(s.beta);
      body.f32(s.lambda_a);
      body.f32(s.lambda_delta);
      ++records;
      continue;
    }
    body.u32(kReal);
    body.string(t.name);
    write_shape(body, t.value->shape());
    body.floats(t.value->values());
    ++records;
  }
  w.u32(static_cast<std::uint32_t>(records));
  w.bytes(body.buffer().data(), body.buffer().size());
  w.save(path);
}

Network import_quantized(const std::string& path) {
  io::Reader r = io::Reader::open(path);
  r.expect_magic("PAQ1");
  const std::uint32_t version = r.u32();
  if (version != kExportVersion) r.fail("unsupported export version " + std::to_string(version));
  const auto meta = nlohmann::json::parse(r.string());
  Network net = build_network(meta.at("arch").get<std::string>(), quantization_from_json(meta.at("quantization")), 0);
  const auto holders = weight_holders(net);
  const auto acts = activations(net);
  std::map<std::string, Tensor*> by_name;
  for (const auto& t : net.tensors()) by_name[t.name] = t.value;
  std::set<std::string> covered;

  const std::uint32_t records = r.u32();
  for (std::uint32_t i = 0; i < records; ++i) {
    const std::uint32_t type = r.u32();
    const std::string name = r.string();
    if (type == kBinarized) {
      const auto it = holders.find(name);
      if (it == holders.end() || !it->second->quantized()) r.fail("no binarized layer named " + name);
      const Shape shape = read_shape(r);
      if (shape != it->second->master().shape()) r.fail("geometry mismatch for " + name);
      WeightPiecewise wp;
      const std::uint32_t m = r.u32();
      wp.u = r.floats(m);
      wp.alpha = r.floats(m);
      wp.sigma = r.f32();
      r.f32();  // lambda_W, also carried by the metadata
      wp.s = backward_endpoints(wp.u);
      const std::uint32_t words = r.u32();
      std::vector<BitPlane> planes;
      for (std::uint32_t p = 0; p < m; ++p) {
        std::vector<std::uint64_t> data(words);
        for (auto& word : data) word = r.u64();
        planes.emplace_back(element_count(shape), std::move(data));
      }
      it->second->freeze(std::move(wp), planes);
      covered.insert(name);
    } else if (type == kReal) {
      const Shape shape = read_shape(r);
      const auto it = by_name.find(name);
      if (it == by_name.end()) r.fail("no tensor named " + name);
      if (shape != it->second->shape()) r.fail("shape mismatch for " + name);
      *it->second = Tensor(shape, r.floats(element_count(shape)));
      covered.insert(name);
    } else if (type == kActivation) {
      const auto it = acts.find(name);
      if (it == acts.end()) r.fail("no activation quantizer named " + name);
      ActivationQuantizerState s;
      const std::uint32_t n = r.u32();
      s.v = r.floats(n);
      s.beta = r.floats(n);
      s.lambda_a = r.f32();
      s.lambda_delta = r.f32();
      it->second->set_state(s);
      for (const char* suffix : {".beta", ".v", ".config"}) covered.insert(name + suffix);
    } else {
      r.fail("unknown record type " + std::to_string(type));
    }
  }
  std::string missing;
  for (const auto& [name, t] : by_name)
    if (!covered.count(name)) missing += " " + name;
  if (!missing.empty()) throw std::runtime_error(path + ": export lacks tensors:" + missing);
  return net;
}

bool is_quantized_export(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "PAQ1";
}

}  // namespace pa::net
