#ifndef PA_LAYERS_HPP
#define PA_LAYERS_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pa/activation_quantizer.hpp"
#include "pa/bitplane.hpp"
#include "pa/tensor.hpp"
#include "pa/weight_quantizer.hpp"

namespace pa::net {

using pa::to_string;

enum class TensorRole { Weight, Bias, Gamma, Shift, ActivationBeta, ActivationEndpoint, State };

/// A named tensor owned by a layer. `grad` is null for non-trainable state.
struct TensorRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  TensorRole role = TensorRole::State;
};

enum class LayerKind { Conv, BatchNorm, PaActivation, Relu, MaxPool, GlobalAvgPool, FullyConnected, Residual };

std::string to_string(LayerKind kind);

/// Static description of one layer.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pad = 0;
  /// "real", "pa" (weights) or "pa-activation".
  std::string policy = "real";
  bool is_first = false, is_last = false, is_downsampling = false;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual LayerKind kind() const = 0;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  /// Consumes the cache of the last forward call; accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad) = 0;
  virtual void collect(std::vector<TensorRef>& /*out*/) {}
  virtual void after_update() {}
  virtual void describe(std::vector<LayerSpec>& out) const;
  /// Visits this layer and any nested ones.
  virtual void visit(const std::function<void(Layer&)>& fn) { fn(*this); }

 private:
  std::string name_;
};

using LayerPtr = std::unique_ptr<Layer>;

class PaActivation;

/// Full-precision master weights plus their optional PA view.
class QuantizedWeights {
 public:
  QuantizedWeights(Shape shape, std::optional<WeightQuantizerConfig> quant);

  Tensor& master() { return master_; }
  const Tensor& master() const { return master_; }
  Tensor& grad() { return grad_; }
  bool quantized() const { return quant_.has_value(); }
  const std::optional<WeightQuantizerConfig>& config() const { return quant_; }
  bool frozen() const { return frozen_; }

  /// Weights used by the forward pass; refits the pieces from the live master copy.
  const Tensor& refresh();
  const Tensor& effective() const { return quant_ ? quantized_ : master_; }
  const WeightPiecewise& piecewise() const { return piecewise_; }
  /// One plane per alpha over the effective weights.
  std::vector<BitPlane> planes() const;
  /// Routes a gradient w.r.t. the effective weights onto the master copy.
  void accumulate_grad(const Tensor& grad_effective);
  /// Inference-only: fixes endpoints, alpha and planes; effective = sum(alpha_i T_i).
  void freeze(WeightPiecewise wp, const std::vector<BitPlane>& planes);

 private:
  Tensor master_, grad_, quantized_;
  std::optional<WeightQuantizerConfig> quant_;
  WeightPiecewise piecewise_;
  std::vector<BitPlane> frozen_planes_;
  bool frozen_ = false;
};

/// Worst relative error seen between the dense and bitwise paths while verification is on.
struct VerifyStats {
  double max_relative_error = 0.0;
  std::size_t checked_layers = 0;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t pad, bool bias, std::optional<WeightQuantizerConfig> quant);

  LayerKind kind() const override { return LayerKind::Conv; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  void collect(std::vector<TensorRef>& out) override;
  void describe(std::vector<LayerSpec>& out) const override;

  void init(std::mt19937_64& rng);
  QuantizedWeights& weights() { return weights_; }
  const QuantizedWeights& weights() const { return weights_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  std::size_t stride() const { return stride_; }
  std::size_t pad() const { return pad_; }

  bool is_first = false, is_last = false, is_downsampling = false;
  /// Quantizer producing this layer's input; enables the bitwise verification path.
  PaActivation* source = nullptr;
  VerifyStats* verify = nullptr;

 private:
  Tensor run_dense(const Tensor& x, const Tensor& w) const;
  void check_bitwise(const Tensor& dense_out) const;

  QuantizedWeights weights_;
  Tensor bias_, bias_grad_;
  std::size_t in_channels_, out_channels_, kernel_, stride_, pad_;
  bool has_bias_;
  Tensor input_;
};

class FullyConnected : public Layer {
 public:
  FullyConnected(std::string name, std::size_t in_features, std::size_t out_features, bool bias,
                 std::optional<WeightQuantizerConfig> quant);

  LayerKind kind() const override { return LayerKind::FullyConnected; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  void collect(std::vector<TensorRef>& out) override;
  void describe(std::vector<LayerSpec>& out) const override;

  void init(std::mt19937_64& rng);
  QuantizedWeights& weights() { return weights_; }
  const QuantizedWeights& weights() const { return weights_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

  bool is_first = false, is_last = false;
  PaActivation* source = nullptr;
  VerifyStats* verify = nullptr;

 private:
  QuantizedWeights weights_;
  Tensor bias_, bias_grad_;
  std::size_t in_features_, out_features_;
  bool has_bias_;
  Shape input_shape_{};
  Tensor input_;
};

class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(std::string name, std::size_t channels, float momentum = 0.1f, float eps = 1e-5f);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  void collect(std::vector<TensorRef>& out) override;

  Tensor& gamma() { return gamma_; }
  Tensor& shift() { return shift_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  float momentum_, eps_;
  Tensor gamma_, shift_, gamma_grad_, shift_grad_, running_mean_, running_var_;
  Tensor normalized_;
  std::vector<float> inv_std_;
  bool training_ = true;
};

/// Trainable PA activation quantizer. The first training forward calibrates
/// v and beta from the incoming batch.
class PaActivation : public Layer {
 public:
  PaActivation(std::string name, std::size_t pieces, float lambda_a, std::optional<float> lambda_delta);

  LayerKind kind() const override { return LayerKind::PaActivation; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  void collect(std::vector<TensorRef>& out) override;
  void after_update() override;
  void describe(std::vector<LayerSpec>& out) const override;

  bool calibrated() const { return config_[2] != 0.0f; }
  void calibrate(const Tensor& sample);
  void reset_calibration() { config_[2] = 0.0f; }
  ActivationQuantizerState state() const;
  void set_state(const ActivationQuantizerState& state);
  /// Pre-quantization input of the last forward call.
  const Tensor& last_input() const { return input_; }
  std::size_t pieces() const { return pieces_; }

 private:
  std::size_t pieces_;
  std::optional<float> lambda_delta_override_;
  Tensor beta_, v_, beta_grad_, v_grad_;
  Tensor config_;  // lambda_a, lambda_delta, calibrated flag
  Tensor input_;
};

class Relu : public Layer {
 public:
  using Layer::Layer;
  LayerKind kind() const override { return LayerKind::Relu; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  const Tensor& last_input() const { return input_; }

 private:
  Tensor input_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::string name, std::size_t size);
  LayerKind kind() const override { return LayerKind::MaxPool; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;

 private:
  std::size_t size_;
  Shape input_shape_{};
  std::vector<std::size_t> argmax_;
};

class GlobalAvgPool : public Layer {
 public:
  using Layer::Layer;
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;

 private:
  Shape input_shape_{};
};

/// Pre-activation basic block: BN, act, conv(stride), BN, act, conv, plus a shortcut
/// that is either the identity or a 1x1 conv fed by the first activation.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(std::string name, LayerPtr bn1, LayerPtr act1, std::unique_ptr<Conv2d> conv1, LayerPtr bn2,
                LayerPtr act2, std::unique_ptr<Conv2d> conv2, std::unique_ptr<Conv2d> downsample);

  LayerKind kind() const override { return LayerKind::Residual; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad) override;
  void collect(std::vector<TensorRef>& out) override;
  void after_update() override;
  void describe(std::vector<LayerSpec>& out) const override;
  void visit(const std::function<void(Layer&)>& fn) override;

 private:
  LayerPtr bn1_, act1_;
  std::unique_ptr<Conv2d> conv1_;
  LayerPtr bn2_, act2_;
  std::unique_ptr<Conv2d> conv2_, downsample_;
};

}  // namespace pa::net

#endif  // PA_LAYERS_HPP
