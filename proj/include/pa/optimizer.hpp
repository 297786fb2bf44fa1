#ifndef PA_OPTIMIZER_HPP
#define PA_OPTIMIZER_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pa/checkpoint.hpp"
#include "pa/layers.hpp"

namespace pa::net {

enum class OptimizerKind { SgdMomentum, Adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SgdMomentum;
  float momentum = 0.9f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  /// L2 penalty on conv / fully-connected weights only.
  float weight_decay = 0.0f;

  void validate() const;
};

/// Updates the master parameters in place; state is keyed by tensor name.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  const OptimizerConfig& config() const { return config_; }
  void step(const std::vector<TensorRef>& params, float lr);
  std::uint64_t steps() const { return steps_; }

  void save(Checkpoint& checkpoint) const;
  void load(const Checkpoint& checkpoint);

 private:
  Tensor& slot(std::map<std::string, Tensor>& slots, const TensorRef& p);

  OptimizerConfig config_;
  std::map<std::string, Tensor> first_, second_;
  std::uint64_t steps_ = 0;
};

}  // namespace pa::net

#endif  // PA_OPTIMIZER_HPP
