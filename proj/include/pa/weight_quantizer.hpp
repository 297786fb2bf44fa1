#ifndef PA_WEIGHT_QUANTIZER_HPP
#define PA_WEIGHT_QUANTIZER_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "pa/bitplane.hpp"
#include "pa/tensor.hpp"

namespace pa {

/// Guard applied to std(W) so an all-equal tensor still gets distinct endpoints.
inline constexpr float kSigmaEpsilon = 1e-8f;

struct WeightQuantizerConfig {
  std::size_t pieces = 8;  // M, even
  float lambda = 1.0f;     // backward slope scale
  /// Endpoints in units of std(W); strictly ascending and antisymmetric.
  std::vector<float> endpoint_multipliers;

  /// Table-1 multipliers for M = 8, otherwise ±linspace(0.25, 2.0, M/2).
  static WeightQuantizerConfig with_pieces(std::size_t pieces, float lambda = 1.0f);
  static std::vector<float> default_multipliers(std::size_t pieces);

  /// Throws std::invalid_argument on an odd/zero M or malformed multipliers.
  void validate() const;
};

/// Piece lookup result: index into alpha, or kDeadZone.
inline constexpr int kDeadZone = -1;

/// Fitted piecewise approximation of one weight tensor.
///
/// Pieces are lower-closed half-open intervals. With u ascending and h = M/2:
///   alpha[0]        on w < u[0]
///   alpha[i]        on [u[i-1], u[i])    for 1 <= i < h
///   dead zone (0)   on [u[h-1], u[h])
///   alpha[i]        on [u[i], u[i+1])    for h <= i < M-1
///   alpha[M-1]      on w >= u[M-1]
/// The backward slopes live on intervals delimited by s[i] = (u[i] + u[i+1]) / 2.
struct WeightPiecewise {
  float sigma = 0.0f;           // guarded std(W) used for the endpoints
  std::vector<float> u;         // M forward endpoints
  std::vector<float> s;         // M-1 backward endpoints
  std::vector<float> alpha;     // M scaling coefficients
  std::size_t empty_pieces = 0; // pieces that fell back to their interval midpoint

  std::size_t pieces() const { return u.size(); }
  /// Values taken by the forward map in ascending piece order: alpha[0..h-1], 0, alpha[h..M-1].
  std::vector<float> levels() const;
};

std::vector<float> weight_endpoints(const WeightQuantizerConfig& config, float sigma);
std::vector<float> backward_endpoints(std::span<const float> u);

int piece_index(float w, std::span<const float> u);

struct ScalingFit {
  std::vector<float> alpha;
  std::vector<std::size_t> population;  // elements per piece
  std::size_t dead_zone = 0;
  std::size_t empty_pieces = 0;
};

/// Piece means; empty pieces take the interval midpoint (u[0] - sigma/2 and
/// u[M-1] + sigma/2 for the two unbounded pieces).
ScalingFit fit_scaling_coefficients(const Tensor& weights, std::span<const float> u, float sigma);

/// Endpoints from std(W), then piece means. Requires finite weights.
WeightPiecewise fit_weight_piecewise(const Tensor& weights, const WeightQuantizerConfig& config);

Tensor quantize_weights_forward(const Tensor& weights, const WeightPiecewise& wp);

/// Slope of the backward surrogate at w: lambda * (levels[r+1] - levels[r]) where r counts
/// the backward endpoints <= w.
float weight_backward_slope(float w, const WeightPiecewise& wp, float lambda);

Tensor weight_backward(const Tensor& grad_out, const Tensor& weights, const WeightPiecewise& wp,
                       float lambda);

/// One plane per alpha; bit set where the element falls in that piece.
std::vector<BitPlane> decompose_weight_bases(const Tensor& weights, std::span<const float> u);

}  // namespace pa

#endif  // PA_WEIGHT_QUANTIZER_HPP
