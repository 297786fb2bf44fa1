#ifndef PA_HISTOGRAM_HPP
#define PA_HISTOGRAM_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pa/activation_quantizer.hpp"
#include "pa/tensor.hpp"
#include "pa/weight_quantizer.hpp"

namespace pa {

/// Exact value -> count map, ascending by value.
struct ValueHistogram {
  std::vector<std::pair<float, std::size_t>> buckets;
  std::size_t total() const;
};

ValueHistogram value_histogram(const Tensor& t);

/// Equal-width bins over [lo, hi]; the top edge is closed.
struct BinnedHistogram {
  double lo = 0.0, hi = 0.0;
  std::vector<std::size_t> counts;
  std::size_t total() const;
};

BinnedHistogram binned_histogram(const Tensor& t, std::size_t bins);

std::string to_csv(const ValueHistogram& h);
std::string to_csv(const BinnedHistogram& h);
/// Horizontal bar chart, `width` characters for the largest bin.
std::string render_bars(const BinnedHistogram& h, std::size_t width = 50);

/// Expected quantized histogram from a fit: one bucket per populated coefficient plus
/// the zero bucket when anything maps to 0.
ValueHistogram expected_weight_histogram(const Tensor& weights, const WeightPiecewise& wp);
ValueHistogram expected_activation_histogram(const Tensor& activations, const ActivationQuantizerState& state);

}  // namespace pa

#endif  // PA_HISTOGRAM_HPP
