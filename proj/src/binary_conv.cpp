#include <stdexcept>
#include <string>

#include "pa/bitplane.hpp"
#include "pa/parallel.hpp"

namespace pa {

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad;
  std::size_t window_bits() const { return cin * kh * kw; }
  std::size_t window_words() const { return BitPlane::word_count(window_bits()); }
};

ConvGeometry make_geometry(const Shape& weights, const Shape& activations, std::size_t stride,
                           std::size_t pad) {
  if (weights[1] != activations[1]) {
    throw std::invalid_argument("binary_conv2d: weight planes expect " + std::to_string(weights[1]) +
                                " input channels, activation planes have " +
                                std::to_string(activations[1]));
  }
  ConvGeometry g{};
  g.batch = activations[0];
  g.cin = activations[1];
  g.h = activations[2];
  g.w = activations[3];
  g.cout = weights[0];
  g.kh = weights[2];
  g.kw = weights[3];
  g.stride = stride;
  g.pad = pad;
  g.oh = conv_output_extent(g.h, g.kh, stride, pad);
  g.ow = conv_output_extent(g.w, g.kw, stride, pad);
  return g;
}

void require_plane_length(const BitPlane& p, const Shape& geometry, const char* what) {
  if (p.size() != element_count(geometry)) {
    throw std::invalid_argument(std::string("binary_conv2d: ") + what + " plane has " +
                                std::to_string(p.size()) + " bits, geometry " +
                                to_string(geometry) + " needs " +
                                std::to_string(element_count(geometry)));
  }
}

/// One packed row of Cin*Kh*Kw bits per output channel.
std::vector<std::uint64_t> weight_rows(const BitPlane& plane, const ConvGeometry& g) {
  const std::size_t bits = g.window_bits();
  const std::size_t words = g.window_words();
  std::vector<std::uint64_t> rows(g.cout * words, 0);
  for (std::size_t o = 0; o < g.cout; ++o)
    for (std::size_t r = 0; r < bits; ++r)
      if (plane.test(o * bits + r)) rows[o * words + r / 64] |= std::uint64_t{1} << (r % 64);
  return rows;
}

/// im2row for image n: one packed window per output position, zero outside the input.
std::vector<std::uint64_t> activation_windows(const BitPlane& plane, const ConvGeometry& g,
                                              std::size_t n) {
  const std::size_t words = g.window_words();
  std::vector<std::uint64_t> windows(g.oh * g.ow * words, 0);
  const std::size_t image_base = n * g.cin * g.h * g.w;
  for (std::size_t y = 0; y < g.oh; ++y)
    for (std::size_t x = 0; x < g.ow; ++x) {
      std::uint64_t* row = windows.data() + (y * g.ow + x) * words;
      std::size_t r = 0;
      for (std::size_t c = 0; c < g.cin; ++c)
        for (std::size_t i = 0; i < g.kh; ++i) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + i) -
                          static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t j = 0; j < g.kw; ++j, ++r) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) ||
                ix >= static_cast<std::ptrdiff_t>(g.w))
              continue;
            const std::size_t idx = image_base + (c * g.h + static_cast<std::size_t>(iy)) * g.w +
                                    static_cast<std::size_t>(ix);
            if (plane.test(idx)) row[r / 64] |= std::uint64_t{1} << (r % 64);
          }
        }
    }
  return windows;
}

}  // namespace

std::vector<std::int64_t> binary_conv2d_counts(const BitPlane& weight, const Shape& weight_geometry,
                                               const BitPlane& activation,
                                               const Shape& activation_geometry,
                                               std::size_t stride, std::size_t pad) {
  const ConvGeometry g = make_geometry(weight_geometry, activation_geometry, stride, pad);
  require_plane_length(weight, weight_geometry, "weight");
  require_plane_length(activation, activation_geometry, "activation");
  const std::size_t words = g.window_words();
  const auto rows = weight_rows(weight, g);
  std::vector<std::int64_t> out(g.batch * g.cout * g.oh * g.ow, 0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const auto windows = activation_windows(activation, g, n);
    for (std::size_t o = 0; o < g.cout; ++o)
      for (std::size_t p = 0; p < g.oh * g.ow; ++p) {
        out[(n * g.cout + o) * g.oh * g.ow + p] = static_cast<std::int64_t>(and_popcount_words(
            {rows.data() + o * words, words}, {windows.data() + p * words, words}));
      }
  }
  return out;
}

Tensor binary_conv2d(const PlaneStack& weight_planes, const PlaneStack& activation_planes,
                     const MergedCoefficients& phi, std::size_t stride, std::size_t pad) {
  const ConvGeometry g = make_geometry(weight_planes.geometry, activation_planes.geometry, stride, pad);
  const std::size_t m = weight_planes.planes.size();
  const std::size_t nb = activation_planes.planes.size();
  if (phi.weight_bases != m || phi.activation_bases != nb || phi.phi.size() != m * nb) {
    throw std::invalid_argument("binary_conv2d: merged coefficients are " +
                                std::to_string(phi.weight_bases) + "x" +
                                std::to_string(phi.activation_bases) + " but planes are " +
                                std::to_string(m) + "x" + std::to_string(nb));
  }
  for (const auto& p : weight_planes.planes) require_plane_length(p, weight_planes.geometry, "weight");
  for (const auto& p : activation_planes.planes)
    require_plane_length(p, activation_planes.geometry, "activation");

  const std::size_t words = g.window_words();
  std::vector<std::vector<std::uint64_t>> rows;
  rows.reserve(m);
  for (const auto& p : weight_planes.planes) rows.push_back(weight_rows(p, g));

  Tensor out({g.batch, g.cout, g.oh, g.ow});
  const std::size_t positions = g.oh * g.ow;
  parallel_for(g.batch, [&](std::size_t n) {
    std::vector<std::vector<std::uint64_t>> windows;
    windows.reserve(nb);
    for (const auto& p : activation_planes.planes) windows.push_back(activation_windows(p, g, n));
    for (std::size_t o = 0; o < g.cout; ++o)
      for (std::size_t pos = 0; pos < positions; ++pos) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const std::span<const std::uint64_t> w_row(rows[i].data() + o * words, words);
          for (std::size_t j = 0; j < nb; ++j) {
            const auto count = and_popcount_words(
                w_row, {windows[j].data() + pos * words, words});
            acc += static_cast<double>(phi.phi[i * nb + j]) * static_cast<double>(count);
          }
        }
        out[(n * g.cout + o) * positions + pos] = static_cast<float>(acc);
      }
  });
  return out;
}

}  // namespace pa
