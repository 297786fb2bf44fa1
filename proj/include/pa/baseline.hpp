#ifndef PA_BASELINE_HPP
#define PA_BASELINE_HPP

#include <cstddef>
#include <vector>

#include "pa/bitplane.hpp"
#include "pa/tensor.hpp"

// Reference quantizers the PA scheme is compared against.
namespace pa::baseline {

/// +1 where x >= 0, -1 elsewhere.
Tensor binarize_sign(const Tensor& x);
/// Straight-through: gradients pass unchanged.
Tensor binarize_sign_backward(const Tensor& grad_out);

struct TernaryParams {
  float delta = 0.0f;
  float x_pos = 0.0f;
  float x_neg = 0.0f;
};

struct TernaryResult {
  Tensor values;
  TernaryParams params;
};

/// x_pos / 0 / -x_neg by region, with x_pos = mean(x | x > delta) and
/// x_neg = mean(|x| | x < -delta); empty regions give 0.
TernaryResult ternarize(const Tensor& x, float delta);

/// tanh-normalised fixed-point quantizer with `bits` fractional levels,
/// rounding half away from zero. All-zero input maps to zeros.
Tensor quantize_fixed_point(const Tensor& x, unsigned bits);

/// Weighted sum of +-1 bases; bit 1 in a plane means +1.
struct LinearCombination {
  std::vector<float> epsilon;
  std::vector<BitPlane> bases;
  Shape shape{0, 0, 0, 0};

  std::size_t size() const { return epsilon.size(); }
  Tensor reconstruct() const;
};

/// Shift offsets for P bases: a nested sequence on [-1, 1] (0, -1, 1, -1/2, 1/2, -3/4, ...),
/// so every P-set contains the (P-1)-set and equals the uniform grid when P = 2^k + 1.
std::vector<float> base_shifts(std::size_t count);

/// Bases D_i = sign(x - mean(x) + shift_i * std(x)); epsilon from ridge-regularised
/// least squares (ridge 1e-8).
LinearCombination fit_linear_combination(const Tensor& x, std::size_t count);

}  // namespace pa::baseline

#endif  // PA_BASELINE_HPP
