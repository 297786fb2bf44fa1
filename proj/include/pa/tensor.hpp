#ifndef PA_TENSOR_HPP
#define PA_TENSOR_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pa {

/// Four extents: (N, C, H, W) for activations, (Cout, Cin, Kh, Kw) for weights.
using Shape = std::array<std::size_t, 4>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense rank-4 float tensor, row-major in shape order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  /// 1x1x1xN tensor holding `values`; used for small per-layer parameter vectors.
  static Tensor vector(std::span<const float> values);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  /// Same data, new extents; element counts must agree.
  Tensor reshaped(Shape shape) const;
  void fill(float value);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

/// Throws std::invalid_argument if any element is NaN or infinite.
void require_finite(const Tensor& t, const char* what);

/// Cross-correlation with zero padding, naive loops. Oracle for every other conv path.
Tensor conv2d_reference(const Tensor& input, const Tensor& weights, std::size_t stride,
                        std::size_t pad);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

/// Population standard deviation.
float std_dev(const Tensor& t);
float mean(const Tensor& t);

/// Mean of the elements selected by `mask`; nullopt when nothing is selected
/// (the "empty piece" signal, callers pick the fallback).
std::optional<float> masked_mean(const Tensor& t, std::span<const bool> mask);
std::optional<float> masked_mean(const Tensor& t, const std::vector<bool>& mask);

/// max|a - b| / max|b|, with 0/0 treated as 0.
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace pa

#endif  // PA_TENSOR_HPP
