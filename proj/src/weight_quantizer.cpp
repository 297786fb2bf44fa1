#include "pa/weight_quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pa {

std::vector<float> WeightQuantizerConfig::default_multipliers(std::size_t pieces) {
  if (pieces == 0 || pieces % 2 != 0) {
    throw std::invalid_argument("weight piece count M must be even and >= 2, got " +
                                std::to_string(pieces));
  }
  if (pieces == 8) return {-1.5f, -1.0f, -0.5f, -0.25f, 0.25f, 0.5f, 1.0f, 1.5f};
  const std::size_t half = pieces / 2;
  std::vector<float> positive(half);
  for (std::size_t i = 0; i < half; ++i) {
    positive[i] = half == 1 ? 0.25f
                            : 0.25f + (2.0f - 0.25f) * static_cast<float>(i) /
                                          static_cast<float>(half - 1);
  }
  std::vector<float> out;
  out.reserve(pieces);
  for (std::size_t i = half; i-- > 0;) out.push_back(-positive[i]);
  for (float p : positive) out.push_back(p);
  return out;
}

WeightQuantizerConfig WeightQuantizerConfig::with_pieces(std::size_t pieces, float lambda) {
  WeightQuantizerConfig config;
  config.pieces = pieces;
  config.lambda = lambda;
  config.endpoint_multipliers = default_multipliers(pieces);
  return config;
}

void WeightQuantizerConfig::validate() const {
  if (pieces < 2 || pieces % 2 != 0) {
    throw std::invalid_argument("weight piece count M must be even and >= 2, got " +
                                std::to_string(pieces));
  }
  if (!(lambda > 0.0f)) throw std::invalid_argument("lambda_W must be positive");
  if (endpoint_multipliers.size() != pieces) {
    throw std::invalid_argument("expected " + std::to_string(pieces) + " endpoint multipliers, got " +
                                std::to_string(endpoint_multipliers.size()));
  }
  for (std::size_t i = 0; i < pieces; ++i) {
    if (i > 0 && !(endpoint_multipliers[i] > endpoint_multipliers[i - 1])) {
      throw std::invalid_argument("endpoint multipliers must be strictly ascending");
    }
    if (endpoint_multipliers[i] != -endpoint_multipliers[pieces - 1 - i]) {
      throw std::invalid_argument("endpoint multipliers must be antisymmetric about 0");
    }
  }
}

std::vector<float> WeightPiecewise::levels() const {
  const std::size_t half = alpha.size() / 2;
  std::vector<float> out;
  out.reserve(alpha.size() + 1);
  out.insert(out.end(), alpha.begin(), alpha.begin() + static_cast<std::ptrdiff_t>(half));
  out.push_back(0.0f);
  out.insert(out.end(), alpha.begin() + static_cast<std::ptrdiff_t>(half), alpha.end());
  return out;
}

std::vector<float> weight_endpoints(const WeightQuantizerConfig& config, float sigma) {
  config.validate();
  if (sigma < 0.0f) throw std::invalid_argument("sigma must be non-negative");
  const float guarded = std::max(sigma, kSigmaEpsilon);
  std::vector<float> u(config.pieces);
  for (std::size_t i = 0; i < config.pieces; ++i) u[i] = config.endpoint_multipliers[i] * guarded;
  return u;
}

std::vector<float> backward_endpoints(std::span<const float> u) {
  std::vector<float> s;
  if (u.size() < 2) return s;
  s.reserve(u.size() - 1);
  for (std::size_t i = 0; i + 1 < u.size(); ++i) s.push_back((u[i + 1] + u[i]) / 2.0f);
  return s;
}

int piece_index(float w, std::span<const float> u) {
  const auto below = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), w) - u.begin());
  const std::size_t half = u.size() / 2;
  if (below < half) return static_cast<int>(below);
  if (below == half) return kDeadZone;
  return static_cast<int>(below - 1);
}

ScalingFit fit_scaling_coefficients(const Tensor& weights, std::span<const float> u, float sigma) {
  const std::size_t m = u.size();
  if (m < 2 || m % 2 != 0) throw std::invalid_argument("endpoint count must be even and >= 2");
  std::vector<double> sums(m, 0.0);
  ScalingFit fit;
  fit.population.assign(m, 0);
  for (float w : weights.values()) {
    const int p = piece_index(w, u);
    if (p == kDeadZone) {
      ++fit.dead_zone;
      continue;
    }
    sums[static_cast<std::size_t>(p)] += w;
    ++fit.population[static_cast<std::size_t>(p)];
  }
  const std::size_t half = m / 2;
  const float guarded = std::max(sigma, kSigmaEpsilon);
  fit.alpha.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (fit.population[i] > 0) {
      fit.alpha[i] = static_cast<float>(sums[i] / static_cast<double>(fit.population[i]));
      continue;
    }
    ++fit.empty_pieces;
    if (i == 0) {
      fit.alpha[i] = u[0] - guarded / 2.0f;
    } else if (i == m - 1) {
      fit.alpha[i] = u[m - 1] + guarded / 2.0f;
    } else if (i < half) {
      fit.alpha[i] = (u[i - 1] + u[i]) / 2.0f;
    } else {
      fit.alpha[i] = (u[i] + u[i + 1]) / 2.0f;
    }
  }
  return fit;
}

WeightPiecewise fit_weight_piecewise(const Tensor& weights, const WeightQuantizerConfig& config) {
  require_finite(weights, "fit_weight_piecewise");
  if (weights.empty()) throw std::invalid_argument("cannot fit a piecewise quantizer to an empty tensor");
  WeightPiecewise wp;
  wp.sigma = std::max(std_dev(weights), kSigmaEpsilon);
  wp.u = weight_endpoints(config, wp.sigma);
  wp.s = backward_endpoints(wp.u);
  ScalingFit fit = fit_scaling_coefficients(weights, wp.u, wp.sigma);
  wp.alpha = std::move(fit.alpha);
  wp.empty_pieces = fit.empty_pieces;
  return wp;
}

Tensor quantize_weights_forward(const Tensor& weights, const WeightPiecewise& wp) {
  Tensor out(weights.shape());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const int p = piece_index(weights[j], wp.u);
    out[j] = p == kDeadZone ? 0.0f : wp.alpha[static_cast<std::size_t>(p)];
  }
  return out;
}

float weight_backward_slope(float w, const WeightPiecewise& wp, float lambda) {
  const auto levels = wp.levels();
  const auto r = static_cast<std::size_t>(std::upper_bound(wp.s.begin(), wp.s.end(), w) - wp.s.begin());
  return lambda * (levels[r + 1] - levels[r]);
}

Tensor weight_backward(const Tensor& grad_out, const Tensor& weights, const WeightPiecewise& wp,
                       float lambda) {
  if (grad_out.shape() != weights.shape()) {
    throw std::invalid_argument("weight_backward: gradient shape " + to_string(grad_out.shape()) +
                                " != weight shape " + to_string(weights.shape()));
  }
  const auto levels = wp.levels();
  std::vector<float> slopes(levels.size() - 1);
  for (std::size_t r = 0; r + 1 < levels.size(); ++r) slopes[r] = lambda * (levels[r + 1] - levels[r]);
  Tensor grad(weights.shape());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto r = static_cast<std::size_t>(
        std::upper_bound(wp.s.begin(), wp.s.end(), weights[j]) - wp.s.begin());
    grad[j] = grad_out[j] * slopes[r];
  }
  return grad;
}

std::vector<BitPlane> decompose_weight_bases(const Tensor& weights, std::span<const float> u) {
  std::vector<BitPlane> planes(u.size(), BitPlane(weights.size()));
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const int p = piece_index(weights[j], u);
    if (p != kDeadZone) planes[static_cast<std::size_t>(p)].set(j);
  }
  return planes;
}

}  // namespace pa
