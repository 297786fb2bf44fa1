#include "pa/activation_quantizer.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pa {

std::vector<float> ActivationQuantizerState::t() const {
  const std::size_t n = v.size();
  std::vector<float> t(n + 1);
  for (std::size_t i = 1; i < n; ++i) t[i] = (v[i - 1] + v[i]) / 2.0f;
  t[n] = v[n - 1] + lambda_delta;
  t[0] = 2.0f * v[0] - t[1];
  return t;
}

std::vector<float> ActivationQuantizerState::levels() const {
  std::vector<float> out;
  out.reserve(beta.size() + 1);
  out.push_back(0.0f);
  out.insert(out.end(), beta.begin(), beta.end());
  return out;
}

void ActivationQuantizerState::validate() const {
  if (v.empty()) throw std::invalid_argument("activation quantizer needs N >= 1 pieces");
  if (beta.size() != v.size()) {
    throw std::invalid_argument("activation quantizer has " + std::to_string(v.size()) +
                                " endpoints but " + std::to_string(beta.size()) + " coefficients");
  }
  if (!(lambda_a > 0.0f)) throw std::invalid_argument("lambda_A must be positive");
  if (!(lambda_delta > 0.0f)) throw std::invalid_argument("lambda_delta must be positive");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw std::invalid_argument("activation endpoints must be strictly ascending");
}

float default_lambda_delta(std::span<const float> v) {
  if (v.size() < 2) return 0.5f;
  return 0.5f * (v.back() - v.front()) / static_cast<float>(v.size() - 1);
}

namespace {

float quantile_sorted(const std::vector<float>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<float>(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
}

}  // namespace

ActivationQuantizerState init_activation_state(const Tensor& sample, std::size_t pieces,
                                               float lambda_a, std::optional<float> lambda_delta) {
  if (sample.empty()) throw std::invalid_argument("init_activation_state: empty calibration sample");
  if (pieces == 0) throw std::invalid_argument("activation piece count N must be >= 1");
  require_finite(sample, "init_activation_state");

  std::vector<float> positive;
  for (float a : sample.values())
    if (a > 0.0f) positive.push_back(a);

  ActivationQuantizerState state;
  state.lambda_a = lambda_a;
  state.v.resize(pieces);
  if (positive.size() <= pieces) {
    for (std::size_t i = 0; i < pieces; ++i) {
      state.v[i] = pieces == 1 ? 0.1f
                               : 0.1f + (2.0f - 0.1f) * static_cast<float>(i) /
                                            static_cast<float>(pieces - 1);
    }
  } else {
    std::sort(positive.begin(), positive.end());
    for (std::size_t i = 0; i < pieces; ++i) {
      state.v[i] = quantile_sorted(positive, static_cast<double>(i + 1) / static_cast<double>(pieces + 1));
    }
    project_endpoints(state.v);
  }
  state.lambda_delta = lambda_delta.value_or(default_lambda_delta(state.v));

  std::vector<double> sums(pieces, 0.0);
  std::vector<std::size_t> counts(pieces, 0);
  for (float a : sample.values()) {
    const std::size_t level = activation_level(a, state.v);
    if (level == 0) continue;
    sums[level - 1] += a;
    ++counts[level - 1];
  }
  state.beta.resize(pieces);
  for (std::size_t i = 0; i < pieces; ++i) {
    if (counts[i] > 0) {
      state.beta[i] = static_cast<float>(sums[i] / static_cast<double>(counts[i]));
    } else if (i + 1 < pieces) {
      state.beta[i] = (state.v[i] + state.v[i + 1]) / 2.0f;
    } else {
      state.beta[i] = state.v[i] + state.lambda_delta / 2.0f;
    }
  }
  state.validate();
  return state;
}

std::size_t activation_level(float a, std::span<const float> v) {
  return static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), a) - v.begin());
}

Tensor quantize_activations_forward(const Tensor& activations, const ActivationQuantizerState& state) {
  const auto levels = state.levels();
  Tensor out(activations.shape());
  for (std::size_t j = 0; j < activations.size(); ++j) out[j] = levels[activation_level(activations[j], state.v)];
  return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": gradient shape " + to_string(a.shape()) +
                                " != activation shape " + to_string(b.shape()));
  }
}

/// Backward region of `a`: 1..N inside [t[0], t[N]), 0 outside.
std::size_t backward_region(float a, const std::vector<float>& t) {
  if (a < t.front() || a >= t.back()) return 0;
  return static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), a) - t.begin());
}

}  // namespace

ActivationGradients activation_backward(const Tensor& grad_out, const Tensor& activations,
                                        const ActivationQuantizerState& state) {
  require_same_shape(grad_out, activations, "activation_backward");
  const std::size_t n = state.pieces();
  const auto t = state.t();
  const auto levels = state.levels();
  std::vector<float> slope(n + 1, 0.0f);
  for (std::size_t r = 1; r <= n; ++r) slope[r] = state.lambda_a * (levels[r] - levels[r - 1]);

  std::vector<double> beta_sums(n, 0.0), window_sums(n, 0.0);
  ActivationGradients g{Tensor(activations.shape()), {}, {}};
  for (std::size_t j = 0; j < activations.size(); ++j) {
    const float a = activations[j];
    const float go = grad_out[j];
    const std::size_t level = activation_level(a, state.v);
    if (level > 0) beta_sums[level - 1] += go;
    const std::size_t region = backward_region(a, t);
    g.input[j] = go * slope[region];
    if (region > 0) window_sums[region - 1] += go;
  }
  g.beta.resize(n);
  g.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.beta[i] = static_cast<float>(beta_sums[i]);
    g.v[i] = static_cast<float>(static_cast<double>(slope[i + 1]) * window_sums[i]);
  }
  return g;
}

Tensor activation_backward_input(const Tensor& grad_out, const Tensor& activations,
                                 const ActivationQuantizerState& state) {
  return activation_backward(grad_out, activations, state).input;
}

std::vector<float> grad_beta(const Tensor& grad_out, const Tensor& activations,
                             const ActivationQuantizerState& state) {
  return activation_backward(grad_out, activations, state).beta;
}

std::vector<float> grad_v(const Tensor& grad_out, const Tensor& activations,
                          const ActivationQuantizerState& state) {
  return activation_backward(grad_out, activations, state).v;
}

std::vector<BitPlane> decompose_activation_bases(const Tensor& activations,
                                                 const ActivationQuantizerState& state) {
  std::vector<BitPlane> planes(state.pieces(), BitPlane(activations.size()));
  for (std::size_t j = 0; j < activations.size(); ++j) {
    const std::size_t level = activation_level(activations[j], state.v);
    if (level > 0) planes[level - 1].set(j);
  }
  return planes;
}

bool project_endpoints(std::vector<float>& v, float gap) {
  bool moved = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const float floor = v[i - 1] + gap;
    if (v[i] < floor) {
      v[i] = floor;
      moved = true;
    }
  }
  return moved;
}

}  // namespace pa
