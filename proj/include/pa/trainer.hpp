#ifndef PA_TRAINER_HPP
#define PA_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "pa/checkpoint.hpp"
#include "pa/dataset.hpp"
#include "pa/network.hpp"
#include "pa/optimizer.hpp"

namespace pa::net {

struct TrainConfig {
  float lr = 0.01f;
  /// Multiplies the learning rate after every epoch.
  float decay = 0.95f;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool augment = false;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_top1 = 0.0;
  double test_top1 = 0.0;
  double test_top5 = 0.0;
  double lr = 0.0;  // rate used during the epoch
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct EvalResult {
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t samples = 0;
  VerifyStats verify;
};

/// Inference-mode evaluation. With `verify`, every PA layer also runs its bitwise path.
EvalResult evaluate(Network& net, const data::Dataset& ds, std::size_t batch_size, bool verify = false);

class Trainer {
 public:
  Trainer(Network& net, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  float lr() const { return lr_; }
  std::size_t epochs_done() const { return epoch_; }
  Optimizer& optimizer() { return optimizer_; }

  /// Zero grads, forward, loss, backward, update, endpoint projection.
  LossResult step(const Tensor& x, std::span<const std::uint8_t> labels);
  EpochMetrics run_epoch(const data::Dataset& train, const data::Dataset* test);
  /// Runs until `config().epochs` epochs are done, calling `on_epoch` after each.
  std::vector<EpochMetrics> fit(const data::Dataset& train, const data::Dataset* test,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

  /// Network tensors, optimizer state, epoch and learning rate.
  Checkpoint checkpoint() const;
  void resume(const Checkpoint& checkpoint);

 private:
  Network& net_;
  TrainConfig config_;
  Optimizer optimizer_;
  float lr_;
  std::size_t epoch_ = 0;
};

/// Seed for epoch-local randomness (shuffle order, augmentation).
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

}  // namespace pa::net

#endif  // PA_TRAINER_HPP
