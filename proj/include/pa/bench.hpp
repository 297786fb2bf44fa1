#ifndef PA_BENCH_HPP
#define PA_BENCH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pa::bench {

struct Row {
  std::string kind;  // "dot" or "conv"
  std::string size;  // bit count, or NxCxHxW/CoutxK
  double naive_ns = 0.0;
  double packed_ns = 0.0;
  double speedup = 0.0;
  std::string note;
};

inline constexpr const char* kCsvHeader = "kind,size,naive_ns,packed_ns,speedup,note";

/// Packed AND+popcount dot against a byte-per-bit loop, median of `repeats` timings.
Row time_dot(std::size_t bits, std::size_t repeats, std::uint64_t seed);
/// binary_conv2d against conv2d_reference on the dequantized operands.
Row time_conv(std::size_t channels, std::size_t spatial, std::size_t out_channels, std::size_t kernel,
              std::size_t weight_bases, std::size_t activation_bases, std::size_t repeats, std::uint64_t seed);

std::string to_csv(const std::vector<Row>& rows);

}  // namespace pa::bench

#endif  // PA_BENCH_HPP
