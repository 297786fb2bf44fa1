#ifndef PA_CHECKPOINT_HPP
#define PA_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pa/network.hpp"

namespace pa::net {

enum class EntryKind : std::uint32_t { Parameter = 0, State = 1, Optimizer = 2 };

struct CheckpointEntry {
  std::string name;
  EntryKind kind = EntryKind::Parameter;
  Tensor value;
};

/// "PACK" container: u32 version, u32-length JSON metadata, then a table of
/// (name, kind, 4 x u32 shape, u32 dtype, u64 byte count, little-endian f32 payload).
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  void put(std::string name, EntryKind kind, Tensor value);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json to_json(const QuantizationSpec& spec);
QuantizationSpec quantization_from_json(const nlohmann::json& j);

/// Snapshot of every network tensor plus arch/quantization metadata.
Checkpoint capture(Network& net);
/// Strict restore: every network tensor must be present with a matching shape and
/// every parameter/state entry must belong to the network.
void restore(Network& net, const Checkpoint& checkpoint);
/// Builds the network named in the metadata and restores it.
Network network_from_checkpoint(const Checkpoint& checkpoint);

/// Loads weights and batch-norm tensors from a (typically full-precision) checkpoint,
/// then calibrates every activation quantizer on `calibration_batch`.
void load_pretrained(Network& net, const Checkpoint& checkpoint, const Tensor& calibration_batch);

}  // namespace pa::net

#endif  // PA_CHECKPOINT_HPP
