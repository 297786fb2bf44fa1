#include "pa/bitplane.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace pa {

BitPlane::BitPlane(std::size_t len, std::vector<std::uint64_t> words)
    : len_(len), words_(std::move(words)) {
  if (words_.size() != word_count(len_)) {
    throw std::invalid_argument("bit plane of length " + std::to_string(len_) + " needs " +
                                std::to_string(word_count(len_)) + " words, got " +
                                std::to_string(words_.size()));
  }
  clear_padding();
}

void BitPlane::clear_padding() {
  const std::size_t tail = len_ % kWordBits;
  if (tail != 0) words_.back() &= (std::uint64_t{1} << tail) - 1;
}

std::size_t BitPlane::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

BitPlane pack(const std::vector<bool>& mask) {
  BitPlane plane(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) plane.set(i);
  return plane;
}

std::vector<bool> unpack(const BitPlane& plane) {
  std::vector<bool> mask(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) mask[i] = plane.test(i);
  return mask;
}

namespace {

void require_same_length(const BitPlane& x, const BitPlane& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("bit plane length mismatch: " + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()));
  }
}

}  // namespace

std::uint64_t and_popcount_words(std::span<const std::uint64_t> x,
                                 std::span<const std::uint64_t> y) {
  std::uint64_t n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) n += static_cast<std::uint64_t>(std::popcount(x[k] & y[k]));
  return n;
}

std::uint64_t dot_and_popcount(const BitPlane& x, const BitPlane& y) {
  require_same_length(x, y);
  return and_popcount_words(x.words(), y.words());
}

std::int64_t dot_xnor_popcount(const BitPlane& x, const BitPlane& y) {
  require_same_length(x, y);
  const auto xw = x.words();
  const auto yw = y.words();
  std::int64_t agree = 0;
  for (std::size_t k = 0; k < xw.size(); ++k) {
    std::uint64_t same = ~(xw[k] ^ yw[k]);
    // pad bits are zero in both operands, so XNOR sets them; mask them out
    if (k + 1 == xw.size() && x.size() % BitPlane::kWordBits != 0) {
      same &= (std::uint64_t{1} << (x.size() % BitPlane::kWordBits)) - 1;
    }
    agree += std::popcount(same);
  }
  return 2 * agree - static_cast<std::int64_t>(x.size());
}

MergedCoefficients merge_coefficients(std::span<const float> alpha, std::span<const float> beta) {
  MergedCoefficients merged;
  merged.weight_bases = alpha.size();
  merged.activation_bases = beta.size();
  merged.phi.reserve(alpha.size() * beta.size());
  for (float a : alpha)
    for (float b : beta) merged.phi.push_back(a * b);
  return merged;
}

}  // namespace pa
