#include "pa/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pa {

std::size_t ValueHistogram::total() const {
  std::size_t n = 0;
  for (const auto& [v, c] : buckets) n += c;
  return n;
}

std::size_t BinnedHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

namespace {

ValueHistogram from_map(const std::map<float, std::size_t>& m) {
  ValueHistogram h;
  for (const auto& [v, c] : m)
    if (c > 0) h.buckets.emplace_back(v, c);
  return h;
}

}  // namespace

ValueHistogram value_histogram(const Tensor& t) {
  std::map<float, std::size_t> m;
  for (float v : t.values()) ++m[v == 0.0f ? 0.0f : v];  // fold -0 into +0
  return from_map(m);
}

BinnedHistogram binned_histogram(const Tensor& t, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  BinnedHistogram h;
  h.counts.assign(bins, 0);
  if (t.empty()) return h;
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  h.lo = *lo;
  h.hi = *hi;
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (float v : t.values()) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - h.lo) / width) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

std::string to_csv(const ValueHistogram& h) {
  std::ostringstream out;
  out.precision(9);
  out << "value,count\n";
  for (const auto& [v, c] : h.buckets) out << v << ',' << c << '\n';
  return out.str();
}

std::string to_csv(const BinnedHistogram& h) {
  std::ostringstream out;
  out.precision(9);
  out << "bin_lo,bin_hi,count\n";
  const double width = h.counts.empty() ? 0.0 : (h.hi - h.lo) / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << h.lo + width * static_cast<double>(b) << ',' << h.lo + width * static_cast<double>(b + 1) << ','
        << h.counts[b] << '\n';
  return out.str();
}

std::string render_bars(const BinnedHistogram& h, std::size_t width) {
  std::ostringstream out;
  const std::size_t peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  const double bin = h.counts.empty() ? 0.0 : (h.hi - h.lo) / static_cast<double>(h.counts.size());
  char label[64];
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const std::size_t len = peak ? (h.counts[b] * width + peak - 1) / peak : 0;
    std::snprintf(label, sizeof label, "%+10.4f %8zu ", h.lo + bin * (static_cast<double>(b) + 0.5), h.counts[b]);
    out << label << std::string(len, '#') << '\n';
  }
  return out.str();
}

ValueHistogram expected_weight_histogram(const Tensor& weights, const WeightPiecewise& wp) {
  const ScalingFit fit = fit_scaling_coefficients(weights, wp.u, wp.sigma);
  std::map<float, std::size_t> m;
  for (std::size_t i = 0; i < wp.alpha.size(); ++i) m[wp.alpha[i]] += fit.population[i];
  m[0.0f] += fit.dead_zone;
  return from_map(m);
}

ValueHistogram expected_activation_histogram(const Tensor& activations, const ActivationQuantizerState& state) {
  std::vector<std::size_t> population(state.pieces() + 1, 0);
  for (float a : activations.values()) ++population[activation_level(a, state.v)];
  std::map<float, std::size_t> m;
  m[0.0f] += population[0];
  for (std::size_t i = 0; i < state.pieces(); ++i) m[state.beta[i]] += population[i + 1];
  return from_map(m);
}

}  // namespace pa
