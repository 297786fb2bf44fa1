#include "pa/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pa::net {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) {
    throw std::logic_error("add_into: " + to_string(dst.shape()) + " vs " + to_string(src.shape()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void require_channels(const Tensor& x, std::size_t channels, const std::string& layer) {
  if (x.dim(1) != channels) {
    throw std::invalid_argument(layer + ": expected " + std::to_string(channels) + " input channels, got " +
                                to_string(x.shape()));
  }
}

void he_normal(Tensor& w, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (auto& v : w.values()) v = dist(rng);
}

void record(VerifyStats* stats, const Tensor& bitwise, const Tensor& dense) {
  if (!stats) return;
  stats->max_relative_error = std::max(stats->max_relative_error, max_relative_error(bitwise, dense));
  ++stats->checked_layers;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::BatchNorm: return "batch-norm";
    case LayerKind::PaActivation: return "pa-activation";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "pool";
    case LayerKind::GlobalAvgPool: return "global-pool";
    case LayerKind::FullyConnected: return "fully-connected";
    case LayerKind::Residual: return "residual-add";
  }
  return "unknown";
}

void Layer::describe(std::vector<LayerSpec>& out) const {
  LayerSpec s;
  s.kind = kind();
  s.name = name_;
  out.push_back(s);
}

// ---------------------------------------------------------------- weights

QuantizedWeights::QuantizedWeights(Shape shape, std::optional<WeightQuantizerConfig> quant)
    : master_(shape), grad_(shape), quantized_(shape), quant_(std::move(quant)) {
  if (quant_) quant_->validate();
}

const Tensor& QuantizedWeights::refresh() {
  if (quant_ && !frozen_) {
    piecewise_ = fit_weight_piecewise(master_, *quant_);
    quantized_ = quantize_weights_forward(master_, piecewise_);
  }
  return effective();
}

std::vector<BitPlane> QuantizedWeights::planes() const {
  if (!quant_) throw std::logic_error("real-valued weights have no binary planes");
  return frozen_ ? frozen_planes_ : decompose_weight_bases(master_, piecewise_.u);
}

void QuantizedWeights::accumulate_grad(const Tensor& grad_effective) {
  if (frozen_) throw std::logic_error("frozen (imported) weights cannot be trained");
  if (!quant_) {
    add_into(grad_, grad_effective);
    return;
  }
  add_into(grad_, weight_backward(grad_effective, master_, piecewise_, quant_->lambda));
}

void QuantizedWeights::freeze(WeightPiecewise wp, const std::vector<BitPlane>& planes) {
  if (!quant_) throw std::logic_error("cannot freeze real-valued weights");
  if (planes.size() != wp.alpha.size()) throw std::invalid_argument("plane count differs from alpha count");
  Tensor q(master_.shape());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].size() != q.size()) throw std::invalid_argument("plane length differs from weight count");
    for (std::size_t j = 0; j < q.size(); ++j)
      if (planes[i].test(j)) q[j] += wp.alpha[i];
  }
  piecewise_ = std::move(wp);
  frozen_planes_ = planes;
  quantized_ = q;
  master_ = q;
  frozen_ = true;
}

// ---------------------------------------------------------------- conv

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t pad, bool bias, std::optional<WeightQuantizerConfig> quant)
    : Layer(std::move(name)),
      weights_({out_channels, in_channels, kernel, kernel}, std::move(quant)),
      bias_(Shape{1, 1, 1, out_channels}),
      bias_grad_(Shape{1, 1, 1, out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
  if (stride == 0 || kernel == 0) throw std::invalid_argument(this->name() + ": kernel and stride must be >= 1");
}

void Conv2d::init(std::mt19937_64& rng) {
  he_normal(weights_.master(), in_channels_ * kernel_ * kernel_, rng);
  bias_.fill(0.0f);
}

namespace {

struct ConvDims {
  std::size_t cin, h, w, k, stride, pad, oh, ow;
  std::size_t rows() const { return cin * k * k; }
  std::size_t positions() const { return oh * ow; }
};

ConvDims conv_dims(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
  ConvDims d{x.dim(1), x.dim(2), x.dim(3), k, stride, pad, 0, 0};
  d.oh = conv_output_extent(d.h, k, stride, pad);
  d.ow = conv_output_extent(d.w, k, stride, pad);
  return d;
}

void im2col(const float* image, const ConvDims& d, float* cols) {
  const std::size_t pos = d.positions();
  for (std::size_t c = 0; c < d.cin; ++c)
    for (std::size_t kh = 0; kh < d.k; ++kh)
      for (std::size_t kw = 0; kw < d.k; ++kw) {
        float* row = cols + ((c * d.k + kh) * d.k + kw) * pos;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * d.stride + kh) - static_cast<long>(d.pad);
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * d.stride + kw) - static_cast<long>(d.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(d.h) && ix < static_cast<long>(d.w);
            row[oy * d.ow + ox] =
                inside ? image[(c * d.h + static_cast<std::size_t>(iy)) * d.w + static_cast<std::size_t>(ix)] : 0.0f;
          }
        }
      }
}

void col2im(const float* cols, const ConvDims& d, float* image) {
  const std::size_t pos = d.positions();
  for (std::size_t c = 0; c < d.cin; ++c)
    for (std::size_t kh = 0; kh < d.k; ++kh)
      for (std::size_t kw = 0; kw < d.k; ++kw) {
        const float* row = cols + ((c * d.k + kh) * d.k + kw) * pos;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * d.stride + kh) - static_cast<long>(d.pad);
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * d.stride + kw) - static_cast<long>(d.pad);
            if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
            image[(c * d.h + static_cast<std::size_t>(iy)) * d.w + static_cast<std::size_t>(ix)] += row[oy * d.ow + ox];
          }
        }
      }
}

}  // namespace

Tensor Conv2d::run_dense(const Tensor& x, const Tensor& w) const {
  const ConvDims d = conv_dims(x, kernel_, stride_, pad_);
  const std::size_t batch = x.dim(0);
  Tensor out({batch, out_channels_, d.oh, d.ow});
  std::vector<float> cols(d.rows() * d.positions());
  const ConstMatrixMap wm(w.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(d.rows()));
  const ConstMatrixMap cm(cols.data(), static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(d.positions()));
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.data() + n * d.cin * d.h * d.w, d, cols.data());
    MatrixMap om(out.data() + n * out_channels_ * d.positions(), static_cast<Eigen::Index>(out_channels_),
                 static_cast<Eigen::Index>(d.positions()));
    om.noalias() = wm * cm;
    if (has_bias_) om.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.data(), static_cast<Eigen::Index>(out_channels_));
  }
  return out;
}

void Conv2d::check_bitwise(const Tensor& dense_out) const {
  if (!verify || !source || !weights_.quantized()) return;
  if (source->last_input().shape() != input_.shape()) return;
  const ActivationQuantizerState state = source->state();
  PlaneStack wp{weights_.master().shape(), weights_.planes()};
  PlaneStack ap{input_.shape(), decompose_activation_bases(source->last_input(), state)};
  Tensor bitwise = binary_conv2d(wp, ap, merge_coefficients(weights_.piecewise().alpha, state.beta), stride_, pad_);
  if (has_bias_) {
    const std::size_t pos = bitwise.dim(2) * bitwise.dim(3);
    for (std::size_t i = 0; i < bitwise.size(); ++i) bitwise[i] += bias_[(i / pos) % out_channels_];
  }
  record(verify, bitwise, dense_out);
}

Tensor Conv2d::forward(const Tensor& x, bool /*training*/) {
  require_channels(x, in_channels_, name());
  input_ = x;
  const Tensor& w = weights_.refresh();
  Tensor out = run_dense(x, w);
  check_bitwise(out);
  return out;
}

Tensor Conv2d::backward(const Tensor& grad) {
  const ConvDims d = conv_dims(input_, kernel_, stride_, pad_);
  const std::size_t batch = input_.dim(0);
  const std::size_t rows = d.rows(), pos = d.positions();
  if (grad.shape() != Shape{batch, out_channels_, d.oh, d.ow}) {
    throw std::invalid_argument(name() + ": gradient shape " + to_string(grad.shape()));
  }
  Tensor grad_w(weights_.master().shape());
  Tensor grad_x(input_.shape());
  std::vector<float> cols(rows * pos), grad_cols(rows * pos);
  const ConstMatrixMap wm(weights_.effective().data(), static_cast<Eigen::Index>(out_channels_),
                          static_cast<Eigen::Index>(rows));
  MatrixMap gwm(grad_w.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(rows));
  const ConstMatrixMap cm(cols.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(pos));
  MatrixMap gcm(grad_cols.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(pos));
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(input_.data() + n * d.cin * d.h * d.w, d, cols.data());
    const ConstMatrixMap gm(grad.data() + n * out_channels_ * pos, static_cast<Eigen::Index>(out_channels_),
                            static_cast<Eigen::Index>(pos));
    gwm.noalias() += gm * cm.transpose();
    gcm.noalias() = wm.transpose() * gm;
    col2im(grad_cols.data(), d, grad_x.data() + n * d.cin * d.h * d.w);
    if (has_bias_)
      for (std::size_t o = 0; o < out_channels_; ++o) bias_grad_[o] += gm.row(static_cast<Eigen::Index>(o)).sum();
  }
  weights_.accumulate_grad(grad_w);
  return grad_x;
}

void Conv2d::collect(std::vector<TensorRef>& out) {
  out.push_back({name() + ".weight", &weights_.master(), &weights_.grad(), TensorRole::Weight});
  if (has_bias_) out.push_back({name() + ".bias", &bias_, &bias_grad_, TensorRole::Bias});
}

void Conv2d::describe(std::vector<LayerSpec>& out) const {
  LayerSpec s{LayerKind::Conv, name(), in_channels_, out_channels_, kernel_, stride_, pad_,
              weights_.quantized() ? "pa" : "real", is_first, is_last, is_downsampling};
  out.push_back(s);
}

// ---------------------------------------------------------------- fully connected

FullyConnected::FullyConnected(std::string name, std::size_t in_features, std::size_t out_features, bool bias,
                               std::optional<WeightQuantizerConfig> quant)
    : Layer(std::move(name)),
      weights_({out_features, in_features, 1, 1}, std::move(quant)),
      bias_(Shape{1, 1, 1, out_features}),
      bias_grad_(Shape{1, 1, 1, out_features}),
      in_features_(in_features),
      out_features_(out_features),
      has_bias_(bias) {}

void FullyConnected::init(std::mt19937_64& rng) {
  he_normal(weights_.master(), in_features_, rng);
  bias_.fill(0.0f);
}

Tensor FullyConnected::forward(const Tensor& x, bool /*training*/) {
  const std::size_t batch = x.dim(0);
  if (batch == 0 || x.size() / batch != in_features_) {
    throw std::invalid_argument(name() + ": expected " + std::to_string(in_features_) + " features, got " +
                                to_string(x.shape()));
  }
  input_shape_ = x.shape();
  input_ = x.reshaped({batch, in_features_, 1, 1});
  const Tensor& w = weights_.refresh();
  Tensor out({batch, out_features_, 1, 1});
  const ConstMatrixMap xm(input_.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_));
  const ConstMatrixMap wm(w.data(), static_cast<Eigen::Index>(out_features_), static_cast<Eigen::Index>(in_features_));
  MatrixMap om(out.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(out_features_));
  om.noalias() = xm * wm.transpose();
  if (has_bias_)
    om.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), static_cast<Eigen::Index>(out_features_));

  if (verify && source && weights_.quantized() && source->last_input().size() == input_.size()) {
    const ActivationQuantizerState state = source->state();
    PlaneStack wp{weights_.master().shape(), weights_.planes()};
    PlaneStack ap{input_.shape(), decompose_activation_bases(source->last_input(), state)};
    Tensor bitwise = binary_conv2d(wp, ap, merge_coefficients(weights_.piecewise().alpha, state.beta), 1, 0);
    if (has_bias_)
      for (std::size_t i = 0; i < bitwise.size(); ++i) bitwise[i] += bias_[i % out_features_];
    record(verify, bitwise, out);
  }
  return out;
}

Tensor FullyConnected::backward(const Tensor& grad) {
  const std::size_t batch = input_.dim(0);
  if (grad.size() != batch * out_features_) throw std::invalid_argument(name() + ": gradient shape " + to_string(grad.shape()));
  Tensor grad_w(weights_.master().shape());
  Tensor grad_x({batch, in_features_, 1, 1});
  const ConstMatrixMap gm(grad.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(out_features_));
  const ConstMatrixMap xm(input_.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_));
  const ConstMatrixMap wm(weights_.effective().data(), static_cast<Eigen::Index>(out_features_),
                          static_cast<Eigen::Index>(in_features_));
  MatrixMap(grad_w.data(), static_cast<Eigen::Index>(out_features_), static_cast<Eigen::Index>(in_features_))
      .noalias() = gm.transpose() * xm;
  MatrixMap(grad_x.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_)).noalias() =
      gm * wm;
  if (has_bias_)
    for (std::size_t o = 0; o < out_features_; ++o) bias_grad_[o] += gm.col(static_cast<Eigen::Index>(o)).sum();
  weights_.accumulate_grad(grad_w);
  return grad_x.reshaped(input_shape_);
}

void FullyConnected::collect(std::vector<TensorRef>& out) {
  out.push_back({name() + ".weight", &weights_.master(), &weights_.grad(), TensorRole::Weight});
  if (has_bias_) out.push_back({name() + ".bias", &bias_, &bias_grad_, TensorRole::Bias});
}

void FullyConnected::describe(std::vector<LayerSpec>& out) const {
  LayerSpec s{LayerKind::FullyConnected, name(), in_features_, out_features_, 1, 1, 0,
              weights_.quantized() ? "pa" : "real", is_first, is_last, false};
  out.push_back(s);
}

// ---------------------------------------------------------------- batch norm

BatchNorm2d::BatchNorm2d(std::string name, std::size_t channels, float momentum, float eps)
    : Layer(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(Shape{1, 1, 1, channels}, 1.0f),
      shift_(Shape{1, 1, 1, channels}),
      gamma_grad_(Shape{1, 1, 1, channels}),
      shift_grad_(Shape{1, 1, 1, channels}),
      running_mean_(Shape{1, 1, 1, channels}),
      running_var_(Shape{1, 1, 1, channels}, 1.0f) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  require_channels(x, channels_, name());
  const std::size_t batch = x.dim(0), spatial = x.dim(2) * x.dim(3);
  const std::size_t count = batch * spatial;
  normalized_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0f);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    float mu, var;
    if (training) {
      double sum = 0.0;
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t s = 0; s < spatial; ++s) sum += x[(n * channels_ + c) * spatial + s];
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t s = 0; s < spatial; ++s) {
          const double dlt = x[(n * channels_ + c) * spatial + s] - m;
          sq += dlt * dlt;
        }
      mu = static_cast<float>(m);
      var = static_cast<float>(sq / static_cast<double>(count));
      const float unbiased = count > 1 ? static_cast<float>(sq / static_cast<double>(count - 1)) : var;
      running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * mu;
      running_var_[c] = (1.0f - momentum_) * running_var_[c] + momentum_ * unbiased;
    } else {
      mu = running_mean_[c];
      var = std::max(running_var_[c], 0.0f);
    }
    const float inv = 1.0f / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (n * channels_ + c) * spatial + s;
        normalized_[i] = (x[i] - mu) * inv;
        out[i] = gamma_[c] * normalized_[i] + shift_[c];
      }
  }
  training_ = training;
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad) {
  const std::size_t batch = grad.dim(0), spatial = grad.dim(2) * grad.dim(3);
  const double count = static_cast<double>(batch * spatial);
  Tensor gx(grad.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (n * channels_ + c) * spatial + s;
        sum_g += grad[i];
        sum_gx += static_cast<double>(grad[i]) * normalized_[i];
      }
    gamma_grad_[c] += static_cast<float>(sum_gx);
    shift_grad_[c] += static_cast<float>(sum_g);
    const double scale = static_cast<double>(gamma_[c]) * inv_std_[c];
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (n * channels_ + c) * spatial + s;
        if (training_) {
          gx[i] = static_cast<float>(scale * (grad[i] - sum_g / count - normalized_[i] * sum_gx / count));
        } else {
          gx[i] = static_cast<float>(scale * grad[i]);
        }
      }
  }
  return gx;
}

void BatchNorm2d::collect(std::vector<TensorRef>& out) {
  out.push_back({name() + ".gamma", &gamma_, &gamma_grad_, TensorRole::Gamma});
  out.push_back({name() + ".shift", &shift_, &shift_grad_, TensorRole::Shift});
  out.push_back({name() + ".running_mean", &running_mean_, nullptr, TensorRole::State});
  out.push_back({name() + ".running_var", &running_var_, nullptr, TensorRole::State});
}

// ---------------------------------------------------------------- PA activation

PaActivation::PaActivation(std::string name, std::size_t pieces, float lambda_a, std::optional<float> lambda_delta)
    : Layer(std::move(name)),
      pieces_(pieces),
      lambda_delta_override_(lambda_delta),
      beta_(Shape{1, 1, 1, pieces}),
      v_(Shape{1, 1, 1, pieces}),
      beta_grad_(Shape{1, 1, 1, pieces}),
      v_grad_(Shape{1, 1, 1, pieces}),
      config_(Shape{1, 1, 1, 3}) {
  if (pieces == 0) throw std::invalid_argument(this->name() + ": activation piece count N must be >= 1");
  if (!(lambda_a > 0.0f)) throw std::invalid_argument(this->name() + ": lambda_A must be positive");
  if (lambda_delta && !(*lambda_delta > 0.0f)) throw std::invalid_argument(this->name() + ": lambda_delta must be positive");
  config_[0] = lambda_a;
  config_[1] = lambda_delta.value_or(0.5f);
}

void PaActivation::calibrate(const Tensor& sample) {
  set_state(init_activation_state(sample, pieces_, config_[0], lambda_delta_override_));
}

ActivationQuantizerState PaActivation::state() const {
  ActivationQuantizerState s;
  s.v.assign(v_.values().begin(), v_.values().end());
  s.beta.assign(beta_.values().begin(), beta_.values().end());
  s.lambda_a = config_[0];
  s.lambda_delta = config_[1];
  return s;
}

void PaActivation::set_state(const ActivationQuantizerState& state) {
  state.validate();
  if (state.pieces() != pieces_) {
    throw std::invalid_argument(name() + ": state has " + std::to_string(state.pieces()) + " pieces, layer has " +
                                std::to_string(pieces_));
  }
  std::copy(state.v.begin(), state.v.end(), v_.data());
  std::copy(state.beta.begin(), state.beta.end(), beta_.data());
  config_[0] = state.lambda_a;
  config_[1] = state.lambda_delta;
  config_[2] = 1.0f;
}

Tensor PaActivation::forward(const Tensor& x, bool /*training*/) {
  if (!calibrated()) calibrate(x);
  input_ = x;
  return quantize_activations_forward(x, state());
}

Tensor PaActivation::backward(const Tensor& grad) {
  ActivationGradients g = activation_backward(grad, input_, state());
  for (std::size_t i = 0; i < pieces_; ++i) {
    beta_grad_[i] += g.beta[i];
    v_grad_[i] += g.v[i];
  }
  return std::move(g.input);
}

void PaActivation::collect(std::vector<TensorRef>& out) {
  out.push_back({name() + ".beta", &beta_, &beta_grad_, TensorRole::ActivationBeta});
  out.push_back({name() + ".v", &v_, &v_grad_, TensorRole::ActivationEndpoint});
  out.push_back({name() + ".config", &config_, nullptr, TensorRole::State});
}

void PaActivation::after_update() {
  std::vector<float> v(v_.values().begin(), v_.values().end());
  project_endpoints(v);
  std::copy(v.begin(), v.end(), v_.data());
}

void PaActivation::describe(std::vector<LayerSpec>& out) const {
  LayerSpec s;
  s.kind = LayerKind::PaActivation;
  s.name = name();
  s.in_channels = s.out_channels = pieces_;
  s.policy = "pa-activation";
  out.push_back(s);
}

// ---------------------------------------------------------------- simple layers

Tensor Relu::forward(const Tensor& x, bool /*training*/) {
  input_ = x;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return out;
}

Tensor Relu::backward(const Tensor& grad) {
  Tensor g(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] = input_[i] > 0.0f ? grad[i] : 0.0f;
  return g;
}

MaxPool2d::MaxPool2d(std::string name, std::size_t size) : Layer(std::move(name)), size_(size) {
  if (size == 0) throw std::invalid_argument(this->name() + ": pool size must be >= 1");
}

Tensor MaxPool2d::forward(const Tensor& x, bool /*training*/) {
  input_shape_ = x.shape();
  const std::size_t oh = x.dim(2) / size_, ow = x.dim(3) / size_;
  Tensor out({x.dim(0), x.dim(1), oh, ow});
  argmax_.assign(out.size(), 0);
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          std::size_t best = x.offset(n, c, y * size_, xx * size_);
          for (std::size_t dy = 0; dy < size_; ++dy)
            for (std::size_t dx = 0; dx < size_; ++dx) {
              const std::size_t i = x.offset(n, c, y * size_ + dy, xx * size_ + dx);
              if (x[i] > x[best]) best = i;
            }
          const std::size_t o = out.offset(n, c, y, xx);
          out[o] = x[best];
          argmax_[o] = best;
        }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad) {
  Tensor g(input_shape_);
  for (std::size_t o = 0; o < grad.size(); ++o) g[argmax_[o]] += grad[o];
  return g;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool /*training*/) {
  input_shape_ = x.shape();
  const std::size_t spatial = x.dim(2) * x.dim(3);
  Tensor out({x.dim(0), x.dim(1), 1, 1});
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sum = 0.0;
    for (std::size_t s = 0; s < spatial; ++s) sum += x[i * spatial + s];
    out[i] = static_cast<float>(sum / static_cast<double>(spatial));
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad) {
  Tensor g(input_shape_);
  const std::size_t spatial = input_shape_[2] * input_shape_[3];
  const float scale = 1.0f / static_cast<float>(spatial);
  for (std::size_t i = 0; i < grad.size(); ++i)
    for (std::size_t s = 0; s < spatial; ++s) g[i * spatial + s] = grad[i] * scale;
  return g;
}

// ---------------------------------------------------------------- residual

ResidualBlock::ResidualBlock(std::string name, LayerPtr bn1, LayerPtr act1, std::unique_ptr<Conv2d> conv1,
                             LayerPtr bn2, LayerPtr act2, std::unique_ptr<Conv2d> conv2,
                             std::unique_ptr<Conv2d> downsample)
    : Layer(std::move(name)),
      bn1_(std::move(bn1)),
      act1_(std::move(act1)),
      conv1_(std::move(conv1)),
      bn2_(std::move(bn2)),
      act2_(std::move(act2)),
      conv2_(std::move(conv2)),
      downsample_(std::move(downsample)) {}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
  const Tensor a = act1_->forward(bn1_->forward(x, training), training);
  Tensor h = conv1_->forward(a, training);
  h = conv2_->forward(act2_->forward(bn2_->forward(h, training), training), training);
  add_into(h, downsample_ ? downsample_->forward(a, training) : x);
  return h;
}

Tensor ResidualBlock::backward(const Tensor& grad) {
  Tensor g = conv2_->backward(grad);
  g = bn2_->backward(act2_->backward(g));
  Tensor ga = conv1_->backward(g);
  if (downsample_) add_into(ga, downsample_->backward(grad));
  Tensor gx = bn1_->backward(act1_->backward(ga));
  if (!downsample_) add_into(gx, grad);
  return gx;
}

void ResidualBlock::collect(std::vector<TensorRef>& out) {
  for (Layer* l : std::initializer_list<Layer*>{bn1_.get(), act1_.get(), static_cast<Layer*>(conv1_.get()), bn2_.get(), act2_.get(),
                   static_cast<Layer*>(conv2_.get()), static_cast<Layer*>(downsample_.get())})
    if (l) l->collect(out);
}

void ResidualBlock::after_update() {
  act1_->after_update();
  act2_->after_update();
}

void ResidualBlock::describe(std::vector<LayerSpec>& out) const {
  for (const Layer* l : std::initializer_list<const Layer*>{bn1_.get(), act1_.get(), static_cast<const Layer*>(conv1_.get()), bn2_.get(),
                         act2_.get(), static_cast<const Layer*>(conv2_.get()),
                         static_cast<const Layer*>(downsample_.get())})
    if (l) l->describe(out);
  LayerSpec s;
  s.kind = LayerKind::Residual;
  s.name = name();
  out.push_back(s);
}

void ResidualBlock::visit(const std::function<void(Layer&)>& fn) {
  fn(*this);
  for (Layer* l : std::initializer_list<Layer*>{bn1_.get(), act1_.get(), static_cast<Layer*>(conv1_.get()), bn2_.get(), act2_.get(),
                   static_cast<Layer*>(conv2_.get()), static_cast<Layer*>(downsample_.get())})
    if (l) l->visit(fn);
}

}  // namespace pa::net
