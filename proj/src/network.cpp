#include "pa/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pa::net {

void QuantizationSpec::validate() const {
  if (!enabled) return;
  WeightQuantizerConfig::with_pieces(weight_pieces, lambda_w).validate();
  if (activation_pieces == 0) throw std::invalid_argument("activation piece count N must be >= 1");
  if (!(lambda_a > 0.0f)) throw std::invalid_argument("lambda_A must be positive");
  if (lambda_delta && !(*lambda_delta > 0.0f)) throw std::invalid_argument("lambda_delta must be positive");
}

Network::Network(std::string arch, QuantizationSpec quant, Shape input, std::size_t classes)
    : arch_(std::move(arch)), quant_(std::move(quant)), input_(input), classes_(classes) {
  quant_.validate();
}

Tensor Network::forward(const Tensor& x, bool training) {
  if (x.dim(1) != input_[1] || x.dim(2) != input_[2] || x.dim(3) != input_[3]) {
    throw std::invalid_argument(arch_ + ": input " + to_string(x.shape()) + " does not match " + to_string(input_));
  }
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, training);
  return h;
}

Tensor Network::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<TensorRef> Network::tensors() {
  std::vector<TensorRef> out;
  for (auto& layer : layers_) layer->collect(out);
  return out;
}

std::vector<TensorRef> Network::parameters() {
  auto all = tensors();
  std::erase_if(all, [](const TensorRef& r) { return r.grad == nullptr; });
  return all;
}

void Network::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0.0f);
}

void Network::after_update() {
  for (auto& layer : layers_) layer->after_update();
}

std::vector<LayerSpec> Network::describe() const {
  std::vector<LayerSpec> out;
  for (const auto& layer : layers_) layer->describe(out);
  return out;
}

void Network::visit(const std::function<void(Layer&)>& fn) {
  for (auto& layer : layers_) layer->visit(fn);
}

void Network::set_verify(VerifyStats* stats) {
  visit([stats](Layer& l) {
    if (auto* c = dynamic_cast<Conv2d*>(&l)) c->verify = stats;
    if (auto* f = dynamic_cast<FullyConnected*>(&l)) f->verify = stats;
  });
}

void Network::calibrate(const Tensor& batch) {
  // Each quantizer calibrates lazily on the forward pass, so earlier ones are settled first.
  visit([](Layer& l) {
    if (auto* a = dynamic_cast<PaActivation*>(&l)) a->reset_calibration();
  });
  forward(batch, false);
}

// ---------------------------------------------------------------- builders

namespace {

std::optional<WeightQuantizerConfig> weight_policy(const QuantizationSpec& q, bool binarize) {
  if (!q.enabled || !binarize) return std::nullopt;
  return WeightQuantizerConfig::with_pieces(q.weight_pieces, q.lambda_w);
}

/// PA activation when quantizing, otherwise ReLU.
LayerPtr activation(const QuantizationSpec& q, const std::string& name) {
  if (q.enabled) return std::make_unique<PaActivation>(name, q.activation_pieces, q.lambda_a, q.lambda_delta);
  return std::make_unique<Relu>(name);
}

PaActivation* as_pa(const LayerPtr& l) { return dynamic_cast<PaActivation*>(l.get()); }

Network lenet(const QuantizationSpec& q, std::mt19937_64& rng) {
  Network net("lenet", q, {1, 1, 28, 28}, 10);
  const bool real_ends = q.first_last_real;
  auto conv1 = std::make_unique<Conv2d>("conv1", 1, 16, 5, 1, 2, false, weight_policy(q, !real_ends));
  conv1->is_first = true;
  conv1->init(rng);
  net.add(std::move(conv1));
  net.add(std::make_unique<MaxPool2d>("pool1", 2));
  net.add(std::make_unique<BatchNorm2d>("bn1", 16));
  auto act1 = activation(q, "act1");
  auto conv2 = std::make_unique<Conv2d>("conv2", 16, 32, 5, 1, 2, false, weight_policy(q, true));
  conv2->source = as_pa(act1);
  conv2->init(rng);
  net.add(std::move(act1));
  net.add(std::move(conv2));
  net.add(std::make_unique<MaxPool2d>("pool2", 2));
  net.add(std::make_unique<BatchNorm2d>("bn2", 32));
  auto act2 = activation(q, "act2");
  auto fc1 = std::make_unique<FullyConnected>("fc1", 32 * 7 * 7, 128, false, weight_policy(q, true));
  fc1->source = as_pa(act2);
  fc1->init(rng);
  net.add(std::move(act2));
  net.add(std::move(fc1));
  net.add(std::make_unique<BatchNorm2d>("bn3", 128));
  auto act3 = activation(q, "act3");
  auto fc2 = std::make_unique<FullyConnected>("fc2", 128, 10, true, weight_policy(q, !real_ends));
  fc2->is_last = true;
  fc2->source = as_pa(act3);
  fc2->init(rng);
  net.add(std::move(act3));
  net.add(std::move(fc2));
  return net;
}

std::unique_ptr<ResidualBlock> basic_block(const QuantizationSpec& q, const std::string& name, std::size_t cin,
                                           std::size_t cout, std::size_t stride, std::mt19937_64& rng) {
  auto bn1 = std::make_unique<BatchNorm2d>(name + ".bn1", cin);
  auto act1 = activation(q, name + ".act1");
  auto conv1 = std::make_unique<Conv2d>(name + ".conv1", cin, cout, 3, stride, 1, false, weight_policy(q, true));
  conv1->source = as_pa(act1);
  conv1->init(rng);
  auto bn2 = std::make_unique<BatchNorm2d>(name + ".bn2", cout);
  auto act2 = activation(q, name + ".act2");
  auto conv2 = std::make_unique<Conv2d>(name + ".conv2", cout, cout, 3, 1, 1, false, weight_policy(q, true));
  conv2->source = as_pa(act2);
  conv2->init(rng);
  std::unique_ptr<Conv2d> ds;
  if (stride != 1 || cin != cout) {
    ds = std::make_unique<Conv2d>(name + ".downsample", cin, cout, 1, stride, 0, false,
                                  weight_policy(q, q.downsample_binarized));
    ds->is_downsampling = true;
    ds->source = as_pa(act1);
    ds->init(rng);
  }
  return std::make_unique<ResidualBlock>(name, std::move(bn1), std::move(act1), std::move(conv1), std::move(bn2),
                                         std::move(act2), std::move(conv2), std::move(ds));
}

Network resnet20(const QuantizationSpec& q, std::mt19937_64& rng) {
  Network net("resnet20", q, {1, 3, 32, 32}, 10);
  auto stem = std::make_unique<Conv2d>("conv1", 3, 16, 3, 1, 1, false, weight_policy(q, !q.first_last_real));
  stem->is_first = true;
  stem->init(rng);
  net.add(std::move(stem));
  std::size_t cin = 16;
  const std::size_t widths[] = {16, 32, 64};
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t b = 0; b < 3; ++b) {
      const std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
      net.add(basic_block(q, "stage" + std::to_string(s + 1) + "." + std::to_string(b), cin, widths[s], stride, rng));
      cin = widths[s];
    }
  net.add(std::make_unique<BatchNorm2d>("bn_final", 64));
  net.add(std::make_unique<Relu>("relu_final"));
  net.add(std::make_unique<GlobalAvgPool>("pool"));
  auto fc = std::make_unique<FullyConnected>("fc", 64, 10, true, std::nullopt);
  fc->is_last = true;
  fc->init(rng);
  net.add(std::move(fc));
  return net;
}

Network tiny(const QuantizationSpec& q, std::mt19937_64& rng) {
  Network net("tiny", q, {1, 1, 8, 8}, 10);
  auto conv1 = std::make_unique<Conv2d>("conv1", 1, 8, 3, 1, 1, false, weight_policy(q, !q.first_last_real));
  conv1->is_first = true;
  conv1->init(rng);
  net.add(std::move(conv1));
  net.add(std::make_unique<BatchNorm2d>("bn1", 8));
  auto act1 = activation(q, "act1");
  auto conv2 = std::make_unique<Conv2d>("conv2", 8, 8, 3, 1, 1, false, weight_policy(q, true));
  conv2->source = as_pa(act1);
  conv2->init(rng);
  net.add(std::move(act1));
  net.add(std::move(conv2));
  net.add(std::make_unique<BatchNorm2d>("bn2", 8));
  net.add(std::make_unique<Relu>("relu2"));
  net.add(std::make_unique<GlobalAvgPool>("pool"));
  auto fc = std::make_unique<FullyConnected>("fc", 8, 10, true, std::nullopt);
  fc->is_last = true;
  fc->init(rng);
  net.add(std::move(fc));
  return net;
}

}  // namespace

std::vector<std::string> trainable_architectures() { return {"lenet", "resnet20", "tiny"}; }

Network build_network(std::string_view arch, const QuantizationSpec& quant, std::uint64_t seed) {
  quant.validate();
  std::mt19937_64 rng(seed);
  if (arch == "lenet") return lenet(quant, rng);
  if (arch == "resnet20") return resnet20(quant, rng);
  if (arch == "tiny") return tiny(quant, rng);
  std::string known;
  for (const auto& k : trainable_architectures()) known += (known.empty() ? "" : ", ") + k;
  throw std::invalid_argument("unknown trainable architecture '" + std::string(arch) + "'; known: " + known);
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.size() / std::max<std::size_t>(batch, 1);
  if (labels.size() != batch) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                                std::to_string(batch));
  }
  LossResult r;
  r.grad = Tensor(logits.shape());
  double total = 0.0;
  std::vector<double> p(classes);
  for (std::size_t n = 0; n < batch; ++n) {
    const float* z = logits.data() + n * classes;
    const std::size_t y = labels[n];
    if (y >= classes) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += p[k] = std::exp(static_cast<double>(z[k]) - zmax);
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] /= sum;
      const double target = k == y ? 1.0 : 0.0;
      r.grad[n * classes + k] = static_cast<float>((p[k] - target) / static_cast<double>(batch));
    }
    total += -(static_cast<double>(z[y]) - zmax - std::log(sum));
    std::size_t higher = 0;
    for (std::size_t k = 0; k < classes; ++k)
      if (z[k] > z[y] || (z[k] == z[y] && k < y)) ++higher;
    if (higher == 0) ++r.top1;
    if (higher < 5) ++r.top5;
  }
  r.loss = batch ? total / static_cast<double>(batch) : 0.0;
  return r;
}

}  // namespace pa::net
