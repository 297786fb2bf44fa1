#include "pa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pa {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[' << shape[0] << 'x' << shape[1] << 'x' << shape[2] << 'x' << shape[3] << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(element_count(shape), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::vector(std::span<const float> values) {
  return Tensor({1, 1, 1, values.size()}, std::vector<float>(values.begin(), values.end()));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out;
  out.shape_ = shape;
  out.data_ = data_;
  return out;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

void require_finite(const Tensor& t, const char* what) {
  for (float x : t.values()) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + ": tensor contains non-finite values");
    }
  }
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw std::invalid_argument("convolution stride must be >= 1");
  if (in + 2 * pad < kernel) {
    throw std::invalid_argument("kernel extent " + std::to_string(kernel) +
                                " exceeds padded input extent " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d_reference(const Tensor& input, const Tensor& weights, std::size_t stride,
                        std::size_t pad) {
  if (input.dim(1) != weights.dim(1)) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.dim(1)) +
                                " channels but weights expect " + std::to_string(weights.dim(1)) +
                                " (input " + to_string(input.shape()) + ", weights " +
                                to_string(weights.shape()) + ")");
  }
  const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t oh = conv_output_extent(h, kh, stride, pad);
  const std::size_t ow = conv_output_extent(w, kw, stride, pad);
  Tensor out({batch, cout, oh, ow});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t i = 0; i < kh; ++i) {
              const auto iy = static_cast<std::ptrdiff_t>(y * stride + i) -
                              static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t j = 0; j < kw; ++j) {
                const auto ix = static_cast<std::ptrdiff_t>(x * stride + j) -
                                static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += input.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       weights.at(o, c, i, j);
              }
            }
          out.at(n, o, y, x) = acc;
        }
  return out;
}

float mean(const Tensor& t) {
  if (t.empty()) throw std::invalid_argument("mean of an empty tensor");
  double sum = 0.0;
  for (float x : t.values()) sum += x;
  return static_cast<float>(sum / static_cast<double>(t.size()));
}

float std_dev(const Tensor& t) {
  if (t.empty()) throw std::invalid_argument("std_dev of an empty tensor");
  double sum = 0.0;
  for (float x : t.values()) sum += x;
  const double mu = sum / static_cast<double>(t.size());
  double sq = 0.0;
  for (float x : t.values()) sq += (x - mu) * (x - mu);
  return static_cast<float>(std::sqrt(sq / static_cast<double>(t.size())));
}

std::optional<float> masked_mean(const Tensor& t, std::span<const bool> mask) {
  if (mask.size() != t.size()) {
    throw std::invalid_argument("masked_mean: mask length " + std::to_string(mask.size()) +
                                " != element count " + std::to_string(t.size()));
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (mask[i]) {
      sum += t[i];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return static_cast<float>(sum / static_cast<double>(count));
}

std::optional<float> masked_mean(const Tensor& t, const std::vector<bool>& mask) {
  std::unique_ptr<bool[]> flat(new bool[mask.size()]);
  std::copy(mask.begin(), mask.end(), flat.get());
  return masked_mean(t, std::span<const bool>(flat.get(), mask.size()));
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_relative_error: shapes " + to_string(a.shape()) + " and " +
                                to_string(b.shape()) + " differ");
  }
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - b[i]));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  if (diff == 0.0) return 0.0;
  return scale == 0.0 ? diff : diff / scale;
}

}  // namespace pa
