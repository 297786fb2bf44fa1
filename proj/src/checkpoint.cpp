#include "pa/checkpoint.hpp"

#include <algorithm>
#include <stdexcept>

#include "pa/binary_io.hpp"

namespace pa::net {

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void Checkpoint::put(std::string name, EntryKind kind, Tensor value) {
  for (auto& e : entries)
    if (e.name == name) {
      e.kind = kind;
      e.value = std::move(value);
      return;
    }
  entries.push_back({std::move(name), kind, std::move(value)});
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  io::Writer w;
  w.bytes("PACK", 4);
  w.u32(kCheckpointVersion);
  w.string(checkpoint.meta.dump());
  w.u32(static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    w.string(e.name);
    w.u32(static_cast<std::uint32_t>(e.kind));
    for (std::size_t d = 0; d < 4; ++d) w.u32(static_cast<std::uint32_t>(e.value.dim(d)));
    w.u32(0);  // dtype: f32
    w.u64(static_cast<std::uint64_t>(e.value.size()) * 4);
    w.floats(e.value.values());
  }
  w.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  io::Reader r = io::Reader::open(path);
  r.expect_magic("PACK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.meta = nlohmann::json::parse(r.string());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.string();
    const std::uint32_t kind = r.u32();
    if (kind > 2) r.fail("unknown entry kind " + std::to_string(kind));
    e.kind = static_cast<EntryKind>(kind);
    Shape shape{};
    for (auto& d : shape) d = r.u32();
    const std::uint32_t dtype = r.u32();
    if (dtype != 0) r.fail("unsupported dtype " + std::to_string(dtype) + " for entry " + e.name);
    const std::uint64_t bytes = r.u64();
    if (bytes != element_count(shape) * 4) r.fail("payload size mismatch for entry " + e.name);
    e.value = Tensor(shape, r.floats(element_count(shape)));
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

nlohmann::json to_json(const QuantizationSpec& spec) {
  nlohmann::json j;
  j["enabled"] = spec.enabled;
  j["M"] = spec.weight_pieces;
  j["N"] = spec.activation_pieces;
  j["lambda_w"] = spec.lambda_w;
  j["lambda_a"] = spec.lambda_a;
  if (spec.lambda_delta) j["lambda_delta"] = *spec.lambda_delta;
  j["first_last_real"] = spec.first_last_real;
  j["downsample_binarized"] = spec.downsample_binarized;
  return j;
}

QuantizationSpec quantization_from_json(const nlohmann::json& j) {
  QuantizationSpec q;
  q.enabled = j.at("enabled").get<bool>();
  q.weight_pieces = j.at("M").get<std::size_t>();
  q.activation_pieces = j.at("N").get<std::size_t>();
  q.lambda_w = j.at("lambda_w").get<float>();
  q.lambda_a = j.at("lambda_a").get<float>();
  if (j.contains("lambda_delta")) q.lambda_delta = j.at("lambda_delta").get<float>();
  q.first_last_real = j.value("first_last_real", true);
  q.downsample_binarized = j.value("downsample_binarized", true);
  return q;
}

Checkpoint capture(Network& net) {
  Checkpoint ck;
  ck.meta["arch"] = net.arch();
  ck.meta["quantization"] = to_json(net.quantization());
  for (const auto& t : net.tensors()) {
    ck.put(t.name, t.grad ? EntryKind::Parameter : EntryKind::State, *t.value);
  }
  return ck;
}

void restore(Network& net, const Checkpoint& checkpoint) {
  std::vector<std::string> problems;
  const auto tensors = net.tensors();
  for (const auto& t : tensors) {
    const auto* e = checkpoint.find(t.name);
    if (!e) {
      problems.push_back(t.name + " (missing)");
    } else if (e->value.shape() != t.value->shape()) {
      problems.push_back(t.name + " (shape " + to_string(e->value.shape()) + " vs " + to_string(t.value->shape()) + ")");
    }
  }
  for (const auto& e : checkpoint.entries) {
    if (e.kind == EntryKind::Optimizer) continue;
    const bool known = std::any_of(tensors.begin(), tensors.end(), [&](const TensorRef& t) { return t.name == e.name; });
    if (!known) problems.push_back(e.name + " (not in network)");
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match network '" + net.arch() + "':";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  for (const auto& t : tensors) *t.value = checkpoint.find(t.name)->value;
}

Network network_from_checkpoint(const Checkpoint& checkpoint) {
  if (!checkpoint.meta.contains("arch") || !checkpoint.meta.contains("quantization")) {
    throw std::runtime_error("checkpoint metadata lacks arch/quantization");
  }
  Network net = build_network(checkpoint.meta.at("arch").get<std::string>(),
                              quantization_from_json(checkpoint.meta.at("quantization")), 0);
  restore(net, checkpoint);
  return net;
}

namespace {

/// Everything except activation quantizer state, which is re-calibrated instead.
bool transferable(const TensorRef& t) {
  switch (t.role) {
    case TensorRole::ActivationBeta:
    case TensorRole::ActivationEndpoint: return false;
    case TensorRole::State: return !t.name.ends_with(".config");
    default: return true;
  }
}

}  // namespace

void load_pretrained(Network& net, const Checkpoint& checkpoint, const Tensor& calibration_batch) {
  std::vector<std::string> problems;
  const auto tensors = net.tensors();
  for (const auto& t : tensors) {
    if (!transferable(t)) continue;
    const auto* e = checkpoint.find(t.name);
    if (!e) {
      problems.push_back(t.name + " (missing)");
    } else if (e->value.shape() != t.value->shape()) {
      problems.push_back(t.name + " (shape " + to_string(e->value.shape()) + " vs " + to_string(t.value->shape()) + ")");
    }
  }
  for (const auto& e : checkpoint.entries) {
    if (e.kind == EntryKind::Optimizer) continue;
    const bool known = std::any_of(tensors.begin(), tensors.end(), [&](const TensorRef& t) { return t.name == e.name; });
    if (!known) problems.push_back(e.name + " (not in network)");
  }
  if (!problems.empty()) {
    std::string msg = "pretrained checkpoint does not match network '" + net.arch() + "':";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  for (const auto& t : tensors) {
    if (transferable(t)) *t.value = checkpoint.find(t.name)->value;
  }
  net.calibrate(calibration_batch);
}

}  // namespace pa::net
