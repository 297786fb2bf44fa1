// Shared helpers for network-level tests and the acceptance runner.
#ifndef PA_TESTS_FIXTURES_HPP
#define PA_TESTS_FIXTURES_HPP

#include <cmath>
#include <random>
#include <vector>

#include "pa/dataset.hpp"
#include "pa/network.hpp"

namespace fixtures {

/// 1x8x8 images: class k lights a 2x2 block at one of ten fixed spots, plus noise.
/// With `random_labels` the labels are drawn independently of the images.
inline pa::data::Dataset spot_dataset(std::size_t count, std::uint64_t seed, bool random_labels = false) {
  static constexpr std::size_t kSpots[10][2] = {{0, 0}, {0, 3}, {0, 6}, {3, 0}, {3, 3},
                                                {3, 6}, {6, 0}, {6, 3}, {6, 6}, {2, 4}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  std::uniform_int_distribution<int> cls(0, 9);
  pa::data::Dataset ds;
  ds.name = "spots";
  ds.images = pa::Tensor({count, 1, 8, 8});
  ds.labels.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    const int k = cls(rng);
    for (std::size_t i = 0; i < 64; ++i) ds.images[n * 64 + i] = noise(rng);
    for (std::size_t dy = 0; dy < 2; ++dy)
      for (std::size_t dx = 0; dx < 2; ++dx) ds.images.at(n, 0, kSpots[k][0] + dy, kSpots[k][1] + dx) += 2.0f;
    ds.labels[n] = static_cast<std::uint8_t>(random_labels ? cls(rng) : k);
  }
  return ds;
}

struct GradCheck {
  double worst_relative = 0.0;
  std::size_t directions = 0;
  std::size_t kinked = 0;
};

/// Sign pattern of every ReLU input seen by the last forward pass.
inline std::vector<bool> relu_pattern(pa::net::Network& net) {
  std::vector<bool> out;
  for (const auto& layer : net.layers())
    if (const auto* r = dynamic_cast<const pa::net::Relu*>(layer.get()))
      for (float v : r->last_input().values()) out.push_back(v > 0.0f);
  return out;
}

/// Directional central differences: for each parameter tensor and a few random unit
/// directions d, compares <grad, d> against (L(p + h d) - L(p - h d)) / 2h.
/// Directions whose derivative is tiny relative to the gradient norm are skipped, as are
/// directions where some ReLU input changes sign between the two probes.
inline GradCheck check_gradients(pa::net::Network& net, const pa::Tensor& x, const std::vector<std::uint8_t>& labels,
                                 std::uint64_t seed, std::size_t per_tensor = 3, double h = 1e-3) {
  using namespace pa::net;
  auto loss = [&] { return softmax_cross_entropy(net.forward(x, true), labels).loss; };
  loss();
  const std::vector<bool> base = relu_pattern(net);
  net.zero_grad();
  net.backward(softmax_cross_entropy(net.forward(x, true), labels).grad);
  GradCheck out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (const TensorRef& p : net.parameters()) {
    if (p.role == TensorRole::ActivationBeta || p.role == TensorRole::ActivationEndpoint) continue;
    const pa::Tensor grad = *p.grad;
    double gnorm = 0.0;
    for (float g : grad.values()) gnorm += static_cast<double>(g) * g;
    gnorm = std::sqrt(gnorm);
    for (std::size_t k = 0; k < per_tensor; ++k) {
      std::vector<double> d(p.value->size());
      double norm = 0.0;
      for (auto& v : d) {
        v = nd(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      double analytic = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) analytic += (d[i] /= norm) * grad[i];
      if (std::abs(analytic) < 1e-2 * gnorm || std::abs(analytic) < 1e-4) continue;
      const pa::Tensor saved = *p.value;
      for (std::size_t i = 0; i < d.size(); ++i) (*p.value)[i] = static_cast<float>(saved[i] + h * d[i]);
      const double up = loss();
      const bool up_smooth = relu_pattern(net) == base;
      for (std::size_t i = 0; i < d.size(); ++i) (*p.value)[i] = static_cast<float>(saved[i] - h * d[i]);
      const double down = loss();
      const bool down_smooth = relu_pattern(net) == base;
      *p.value = saved;
      if (!up_smooth || !down_smooth) {
        ++out.kinked;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
      out.worst_relative = std::max(out.worst_relative, rel);
      ++out.directions;
    }
  }
  return out;
}

}  // namespace fixtures

#endif  // PA_TESTS_FIXTURES_HPP
