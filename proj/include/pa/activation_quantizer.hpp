#ifndef PA_ACTIVATION_QUANTIZER_HPP
#define PA_ACTIVATION_QUANTIZER_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pa/bitplane.hpp"
#include "pa/tensor.hpp"

namespace pa {

/// Minimum gap kept between consecutive activation endpoints after an update.
inline constexpr float kEndpointGap = 1e-4f;

/// Trainable piecewise activation quantizer.
///
/// Forward: 0 below v[0], beta[i] on [v[i], v[i+1]), beta[N-1] from v[N-1] up.
/// Backward window: t[0] = 2 v[0] - t[1], t[i] = (v[i-1] + v[i]) / 2 for 1 <= i < N,
/// t[N] = v[N-1] + lambda_delta; slope lambda_a * (beta[i] - beta[i-1]) on [t[i], t[i+1])
/// with beta[-1] = 0, and zero outside [t[0], t[N]).
struct ActivationQuantizerState {
  std::vector<float> v;
  std::vector<float> beta;
  float lambda_a = 1.0f;
  float lambda_delta = 0.5f;

  std::size_t pieces() const { return v.size(); }
  /// N+1 backward endpoints derived from v and lambda_delta.
  std::vector<float> t() const;
  /// 0, beta[0], ..., beta[N-1].
  std::vector<float> levels() const;
  void validate() const;
};

/// lambda_delta defaults to half the mean endpoint gap (0.5 when N = 1).
float default_lambda_delta(std::span<const float> v);

/// Endpoints at the i/(N+1) quantiles of the positive part of `sample`
/// (uniform grid on [0.1, 2.0] when at most N values are positive);
/// beta[i] is the sample mean inside piece i, else the piece midpoint.
ActivationQuantizerState init_activation_state(const Tensor& sample, std::size_t pieces,
                                               float lambda_a = 1.0f,
                                               std::optional<float> lambda_delta = std::nullopt);

/// Index of the forward piece holding `a`: 0 for the zero piece, i+1 for beta[i].
std::size_t activation_level(float a, std::span<const float> v);

Tensor quantize_activations_forward(const Tensor& activations, const ActivationQuantizerState& state);

Tensor activation_backward_input(const Tensor& grad_out, const Tensor& activations,
                                 const ActivationQuantizerState& state);

std::vector<float> grad_beta(const Tensor& grad_out, const Tensor& activations,
                             const ActivationQuantizerState& state);

std::vector<float> grad_v(const Tensor& grad_out, const Tensor& activations,
                          const ActivationQuantizerState& state);

/// All three backward quantities from one pass over the elements.
struct ActivationGradients {
  Tensor input;
  std::vector<float> beta;
  std::vector<float> v;
};
ActivationGradients activation_backward(const Tensor& grad_out, const Tensor& activations,
                                        const ActivationQuantizerState& state);

std::vector<BitPlane> decompose_activation_bases(const Tensor& activations,
                                                 const ActivationQuantizerState& state);

/// Ascending sweep v[i] = max(v[i], v[i-1] + gap). Returns true if anything moved.
bool project_endpoints(std::vector<float>& v, float gap = kEndpointGap);

}  // namespace pa

#endif  // PA_ACTIVATION_QUANTIZER_HPP
