#include "pa/baseline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pa::baseline {

Tensor binarize_sign(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0f ? 1.0f : -1.0f;
  return out;
}

Tensor binarize_sign_backward(const Tensor& grad_out) { return grad_out; }

TernaryResult ternarize(const Tensor& x, float delta) {
  if (delta < 0.0f) throw std::invalid_argument("ternary threshold must be non-negative");
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (float v : x.values()) {
    if (v > delta) {
      pos_sum += v;
      ++pos_n;
    } else if (v < -delta) {
      neg_sum += -v;
      ++neg_n;
    }
  }
  TernaryResult r{Tensor(x.shape()), {}};
  r.params.delta = delta;
  r.params.x_pos = pos_n ? static_cast<float>(pos_sum / static_cast<double>(pos_n)) : 0.0f;
  r.params.x_neg = neg_n ? static_cast<float>(neg_sum / static_cast<double>(neg_n)) : 0.0f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > delta) {
      r.values[i] = r.params.x_pos;
    } else if (x[i] < -delta) {
      r.values[i] = -r.params.x_neg;
    } else {
      r.values[i] = 0.0f;
    }
  }
  return r;
}

Tensor quantize_fixed_point(const Tensor& x, unsigned bits) {
  if (bits == 0) throw std::invalid_argument("fixed-point bit-width must be >= 1");
  Tensor out(x.shape());
  double max_tanh = 0.0;
  for (float v : x.values()) max_tanh = std::max(max_tanh, std::abs(std::tanh(static_cast<double>(v))));
  if (max_tanh == 0.0) return out;
  const double levels = std::ldexp(1.0, static_cast<int>(bits)) - 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double y = std::tanh(static_cast<double>(x[i])) / (2.0 * max_tanh) + 0.5;
    const double q = std::round(y * levels) / levels;  // std::round is half-away-from-zero
    out[i] = static_cast<float>(2.0 * q - 1.0);
  }
  return out;
}

Tensor LinearCombination::reconstruct() const {
  Tensor out(shape);
  for (std::size_t i = 0; i < epsilon.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += bases[i].test(j) ? epsilon[i] : -epsilon[i];
  return out;
}

std::vector<float> base_shifts(std::size_t count) {
  std::vector<float> shifts;
  shifts.reserve(count);
  if (count > 0) shifts.push_back(0.0f);
  if (count > 1) shifts.push_back(-1.0f);
  if (count > 2) shifts.push_back(1.0f);
  for (int level = 1; shifts.size() < count; ++level) {
    const double step = std::ldexp(1.0, -level);  // spacing 2^-level on [-1, 1]
    for (double v = -1.0 + step; v < 1.0 && shifts.size() < count; v += 2.0 * step)
      shifts.push_back(static_cast<float>(v));
  }
  return shifts;
}

LinearCombination fit_linear_combination(const Tensor& x, std::size_t count) {
  if (count == 0) throw std::invalid_argument("linear combination needs at least one base");
  if (x.empty()) throw std::invalid_argument("cannot fit a linear combination to an empty tensor");
  const float mu = mean(x);
  const float sigma = std_dev(x);
  const auto shifts = base_shifts(count);

  LinearCombination lc;
  lc.shape = x.shape();
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd d(n, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    BitPlane plane(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const bool positive = x[j] - mu + shifts[i] * sigma >= 0.0f;
      if (positive) plane.set(j);
      d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = positive ? 1.0 : -1.0;
    }
    lc.bases.push_back(std::move(plane));
  }
  Eigen::VectorXd target(n);
  for (Eigen::Index j = 0; j < n; ++j) target(j) = x[static_cast<std::size_t>(j)];
  Eigen::MatrixXd normal = d.transpose() * d;
  normal.diagonal().array() += 1e-8;
  const Eigen::VectorXd eps = normal.ldlt().solve(d.transpose() * target);
  lc.epsilon.resize(count);
  for (std::size_t i = 0; i < count; ++i) lc.epsilon[i] = static_cast<float>(eps(static_cast<Eigen::Index>(i)));
  return lc;
}

}  // namespace pa::baseline
