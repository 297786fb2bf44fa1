#ifndef PA_NETWORK_HPP
#define PA_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pa/layers.hpp"

namespace pa::net {

/// Quantization policy applied when a network is built.
struct QuantizationSpec {
  bool enabled = false;
  std::size_t weight_pieces = 8;      // M
  std::size_t activation_pieces = 7;  // N
  float lambda_w = 1.0f;
  float lambda_a = 1.0f;
  std::optional<float> lambda_delta;
  bool first_last_real = true;
  bool downsample_binarized = true;

  void validate() const;
};

class Network {
 public:
  Network(std::string arch, QuantizationSpec quant, Shape input, std::size_t classes);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const std::string& arch() const { return arch_; }
  const QuantizationSpec& quantization() const { return quant_; }
  /// (1, C, H, W) of a single sample.
  const Shape& input_shape() const { return input_; }
  std::size_t classes() const { return classes_; }

  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  std::vector<LayerPtr>& layers() { return layers_; }

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_logits);

  /// Every named tensor, trainable or not, in a stable order.
  std::vector<TensorRef> tensors();
  /// Only the tensors with gradients.
  std::vector<TensorRef> parameters();
  void zero_grad();
  void after_update();
  std::vector<LayerSpec> describe() const;
  void visit(const std::function<void(Layer&)>& fn);

  /// While set, every PA layer also evaluates its bitwise path and records the discrepancy.
  void set_verify(VerifyStats* stats);
  /// Drops activation calibration and re-derives it from `batch` (inference-mode batch norm).
  void calibrate(const Tensor& batch);

 private:
  std::string arch_;
  QuantizationSpec quant_;
  Shape input_;
  std::size_t classes_;
  std::vector<LayerPtr> layers_;
};

/// lenet (1x28x28), resnet20 (3x32x32) and tiny (1x8x8, two 8-channel convs).
Network build_network(std::string_view arch, const QuantizationSpec& quant, std::uint64_t seed);
std::vector<std::string> trainable_architectures();

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d loss / d logits
  std::size_t top1 = 0;
  std::size_t top5 = 0;
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels);

}  // namespace pa::net

#endif  // PA_NETWORK_HPP
