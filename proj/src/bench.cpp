#include "pa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>

#include "pa/bitplane.hpp"
#include "pa/tensor.hpp"

namespace pa::bench {

namespace {

template <typename Fn>
double median_ns(std::size_t repeats, Fn&& fn) {
  std::vector<double> t;
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - start).count());
  }
  std::nth_element(t.begin(), t.begin() + static_cast<long>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

// Keeps results observable so the timed loops are not optimised away.
volatile std::int64_t g_sink = 0;

/// Stops the compiler from hoisting repeated identical work out of the timing loop.
inline void clobber(const void* p) { asm volatile("" : : "r"(p) : "memory"); }

}  // namespace

Row time_dot(std::size_t bits, std::size_t repeats, std::uint64_t seed) {
  Row row{"dot", std::to_string(bits), 0.0, 0.0, 0.0, ""};
  if (bits == 0) {
    row.note = "skipped: zero-size input";
    return row;
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> a(bits), b(bits);
  BitPlane pa(bits), pb(bits);
  for (std::size_t i = 0; i < bits; ++i) {
    a[i] = coin(rng);
    b[i] = coin(rng);
    if (a[i]) pa.set(i);
    if (b[i]) pb.set(i);
  }
  // Many inner iterations so each sample is well above timer resolution.
  const std::size_t inner = std::max<std::size_t>(1, (1u << 22) / bits);
  row.naive_ns = median_ns(repeats, [&] {
                   std::int64_t acc = 0;
                   for (std::size_t k = 0; k < inner; ++k) {
                     clobber(a.data());
                     std::int64_t s = 0;
                     for (std::size_t i = 0; i < bits; ++i) s += a[i] & b[i];
                     acc += s;
                   }
                   g_sink = acc;
                 }) /
                 static_cast<double>(inner);
  row.packed_ns = median_ns(repeats, [&] {
                    std::int64_t acc = 0;
                    for (std::size_t k = 0; k < inner; ++k) {
                      clobber(pa.words().data());
                      acc += dot_and_popcount(pa, pb);
                    }
                    g_sink = acc;
                  }) /
                  static_cast<double>(inner);
  row.speedup = row.packed_ns > 0.0 ? row.naive_ns / row.packed_ns : 0.0;
  return row;
}

Row time_conv(std::size_t channels, std::size_t spatial, std::size_t out_channels, std::size_t kernel,
              std::size_t weight_bases, std::size_t activation_bases, std::size_t repeats, std::uint64_t seed) {
  Row row{"conv",
          "1x" + std::to_string(channels) + "x" + std::to_string(spatial) + "x" + std::to_string(spatial) + "/" +
              std::to_string(out_channels) + "x" + std::to_string(kernel) + " M" + std::to_string(weight_bases) +
              "N" + std::to_string(activation_bases),
          0.0, 0.0, 0.0, ""};
  if (channels == 0 || spatial == 0 || out_channels == 0 || kernel == 0 || weight_bases == 0 ||
      activation_bases == 0) {
    row.note = "skipped: zero-size input";
    return row;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coef(0.1f, 1.0f);
  const Shape wg{out_channels, channels, kernel, kernel}, ag{1, channels, spatial, spatial};
  PlaneStack w{wg, {}}, a{ag, {}};
  Tensor wd(wg), ad(ag);
  std::vector<float> alpha(weight_bases), beta(activation_bases);
  for (auto& x : alpha) x = coef(rng);
  for (auto& x : beta) x = coef(rng);
  // Disjoint planes: each element belongs to at most one base.
  std::uniform_int_distribution<std::size_t> pick_w(0, weight_bases), pick_a(0, activation_bases);
  for (std::size_t i = 0; i < weight_bases; ++i) w.planes.emplace_back(wd.size());
  for (std::size_t j = 0; j < activation_bases; ++j) a.planes.emplace_back(ad.size());
  for (std::size_t e = 0; e < wd.size(); ++e)
    if (const std::size_t k = pick_w(rng); k < weight_bases) {
      w.planes[k].set(e);
      wd[e] = alpha[k];
    }
  for (std::size_t e = 0; e < ad.size(); ++e)
    if (const std::size_t k = pick_a(rng); k < activation_bases) {
      a.planes[k].set(e);
      ad[e] = beta[k];
    }
  const std::size_t pad = kernel / 2;
  const MergedCoefficients phi = merge_coefficients(alpha, beta);
  row.naive_ns = median_ns(repeats, [&] { g_sink = static_cast<std::int64_t>(conv2d_reference(ad, wd, 1, pad)[0]); });
  row.packed_ns = median_ns(repeats, [&] { g_sink = static_cast<std::int64_t>(binary_conv2d(w, a, phi, 1, pad)[0]); });
  row.speedup = row.packed_ns > 0.0 ? row.naive_ns / row.packed_ns : 0.0;
  row.note = "reference is the naive float loop";
  return row;
}

std::string to_csv(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.kind << ',' << r.size << ',' << r.naive_ns << ',' << r.packed_ns << ',' << r.speedup << ',' << r.note
        << '\n';
  return out.str();
}

}  // namespace pa::bench
