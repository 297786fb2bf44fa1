#ifndef PA_BITPLANE_HPP
#define PA_BITPLANE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pa/tensor.hpp"

namespace pa {

/// Packed {0,1} mask. Bit j of word k holds element 64k+j; bits at positions
/// >= size() are always zero.
class BitPlane {
 public:
  static constexpr std::size_t kWordBits = 64;

  BitPlane() = default;
  explicit BitPlane(std::size_t len) : len_(len), words_(word_count(len), 0) {}
  BitPlane(std::size_t len, std::vector<std::uint64_t> words);

  static std::size_t word_count(std::size_t len) { return (len + kWordBits - 1) / kWordBits; }

  std::size_t size() const { return len_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool test(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
  void set(std::size_t i) { words_[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits); }
  void reset(std::size_t i) { words_[i / kWordBits] &= ~(std::uint64_t{1} << (i % kWordBits)); }

  std::size_t popcount() const;

  bool operator==(const BitPlane&) const = default;

 private:
  void clear_padding();

  std::size_t len_ = 0;
  std::vector<std::uint64_t> words_;
};

BitPlane pack(const std::vector<bool>& mask);
std::vector<bool> unpack(const BitPlane& plane);

/// Sum of x_j * y_j over {0,1} planes: popcount(AND) word by word.
std::uint64_t dot_and_popcount(const BitPlane& x, const BitPlane& y);

/// Sum of x_j * y_j over +-1 planes (bit 1 means +1): 2 * popcount(XNOR) - len.
std::int64_t dot_xnor_popcount(const BitPlane& x, const BitPlane& y);

/// Raw word-span variants used by the convolution kernel; spans must be the same length.
std::uint64_t and_popcount_words(std::span<const std::uint64_t> x,
                                 std::span<const std::uint64_t> y);

/// phi[i * N + j] = alpha[i] * beta[j].
struct MergedCoefficients {
  std::size_t weight_bases = 0;
  std::size_t activation_bases = 0;
  std::vector<float> phi;

  float at(std::size_t i, std::size_t j) const { return phi[i * activation_bases + j]; }
};

MergedCoefficients merge_coefficients(std::span<const float> alpha, std::span<const float> beta);

/// A stack of planes over one tensor geometry (weights: Cout,Cin,Kh,Kw; activations: N,C,H,W).
struct PlaneStack {
  Shape geometry{0, 0, 0, 0};
  std::vector<BitPlane> planes;
};

/// Sum over (i, j) of phi_ij * BinConv(T_i, V_j), with BinConv the integer cross-correlation
/// computed by AND+popcount over re-packed im2row windows. Zero padding keeps pad bits clear.
/// Accumulation runs in double in ascending k = i*N + j order, independent of thread count.
Tensor binary_conv2d(const PlaneStack& weight_planes, const PlaneStack& activation_planes,
                     const MergedCoefficients& phi, std::size_t stride, std::size_t pad);

/// Integer cross-correlation of one weight plane with one activation plane.
std::vector<std::int64_t> binary_conv2d_counts(const BitPlane& weight, const Shape& weight_geometry,
                                               const BitPlane& activation,
                                               const Shape& activation_geometry,
                                               std::size_t stride, std::size_t pad);

}  // namespace pa

#endif  // PA_BITPLANE_HPP
