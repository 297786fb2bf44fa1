#include <doctest.h>

#include <cstdlib>
#include <random>

#include "oracle.hpp"
#include "pa/activation_quantizer.hpp"
#include "pa/bitplane.hpp"
#include "pa/parallel.hpp"
#include "pa/weight_quantizer.hpp"

using namespace pa;

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> b(n);
  for (auto& x : b) x = coin(rng);
  return b;
}

BitPlane to_plane(const std::vector<std::uint8_t>& bits) {
  BitPlane p(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) p.set(i);
  return p;
}

}  // namespace

TEST_SUITE("bitops") {
  TEST_CASE("packing is little-endian within 64-bit words") {
    BitPlane p(70);
    p.set(0);
    p.set(63);
    p.set(64);
    p.set(69);
    REQUIRE(p.words().size() == 2);
    CHECK(p.words()[0] == ((std::uint64_t{1} << 63) | 1u));
    CHECK(p.words()[1] == ((std::uint64_t{1} << 5) | 1u));
    CHECK(p.popcount() == 4);
    p.reset(63);
    CHECK_FALSE(p.test(63));
    const std::vector<bool> mask{true, false, true, true};
    CHECK(unpack(pack(mask)) == mask);
  }

  TEST_CASE("padding bits passed in raw words are cleared") {
    const BitPlane p(3, {~std::uint64_t{0}});
    CHECK(p.popcount() == 3);
    CHECK(p.words()[0] == 7u);
    CHECK_THROWS_AS(BitPlane(3, {}), std::invalid_argument);
  }

  TEST_CASE("dot products on exhaustive edge lengths") {
    std::mt19937_64 rng(1);
    for (std::size_t len : {0u, 1u, 63u, 64u, 65u}) {
      for (int rep = 0; rep < 50; ++rep) {
        const auto a = random_bits(len, rng), b = random_bits(len, rng);
        CHECK(dot_and_popcount(to_plane(a), to_plane(b)) == oracle::naive_and_dot(a, b));
        CHECK(dot_xnor_popcount(to_plane(a), to_plane(b)) == oracle::naive_pm1_dot(a, b));
      }
      const std::vector<std::uint8_t> ones(len, 1), zeros(len, 0);
      CHECK(dot_and_popcount(to_plane(ones), to_plane(ones)) == len);
      CHECK(dot_xnor_popcount(to_plane(zeros), to_plane(zeros)) == static_cast<std::int64_t>(len));
      CHECK(dot_xnor_popcount(to_plane(ones), to_plane(zeros)) == -static_cast<std::int64_t>(len));
    }
  }

  TEST_CASE("dot products on random thousand-bit pairs") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 200; ++rep) {
      const auto a = random_bits(1000, rng), b = random_bits(1000, rng);
      CHECK(dot_and_popcount(to_plane(a), to_plane(b)) == oracle::naive_and_dot(a, b));
      CHECK(dot_xnor_popcount(to_plane(a), to_plane(b)) == oracle::naive_pm1_dot(a, b));
    }
  }

  TEST_CASE("mismatched lengths are rejected") {
    CHECK_THROWS_AS(dot_and_popcount(BitPlane(10), BitPlane(11)), std::invalid_argument);
    CHECK_THROWS_AS(dot_xnor_popcount(BitPlane(64), BitPlane(65)), std::invalid_argument);
  }

  TEST_CASE("merged coefficients are the row-major outer product") {
    const std::vector<float> alpha{1.0f, -2.0f}, beta{0.5f, 3.0f, 4.0f};
    const MergedCoefficients phi = merge_coefficients(alpha, beta);
    CHECK(phi.phi == std::vector<float>{0.5f, 3.0f, 4.0f, -1.0f, -6.0f, -8.0f});
    CHECK(phi.at(1, 2) == -8.0f);
  }

  TEST_CASE("frozen single-plane convolution counts") {
    // 3x3 ones kernel over a 4x4 all-ones map, pad 1: corner 4, edge 6, interior 9.
    BitPlane w(9), a(16);
    for (std::size_t i = 0; i < 9; ++i) w.set(i);
    for (std::size_t i = 0; i < 16; ++i) a.set(i);
    const auto counts = binary_conv2d_counts(w, {1, 1, 3, 3}, a, {1, 1, 4, 4}, 1, 1);
    const std::vector<std::int64_t> expected{4, 6, 6, 4, 6, 9, 9, 6, 6, 9, 9, 6, 4, 6, 6, 4};
    CHECK(counts == expected);
    const auto strided = binary_conv2d_counts(w, {1, 1, 3, 3}, a, {1, 1, 4, 4}, 2, 0);
    CHECK(strided == std::vector<std::int64_t>{9});
  }

  TEST_CASE("property: binary convolution equals the dense convolution of the quantized operands") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> ch(1, 8), sp(3, 16), ker(1, 3), st(1, 2);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t cin = ch(rng), cout = ch(rng), h = sp(rng), k = ker(rng), stride = st(rng);
      const std::size_t pad = k / 2;
      const std::size_t m = 2 * (1 + trial % 4), n = 1 + 2 * (trial % 4);
      const Tensor w = oracle::random_tensor({cout, cin, k, k}, rng, 0.3f);
      const Tensor x = oracle::random_tensor({2, cin, h, h}, rng, 1.0f);
      const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(m));
      const ActivationQuantizerState as = init_activation_state(x, n);
      const Tensor wq = quantize_weights_forward(w, wp);
      const Tensor xq = quantize_activations_forward(x, as);
      const PlaneStack wst{w.shape(), decompose_weight_bases(w, wp.u)};
      const PlaneStack ast{x.shape(), decompose_activation_bases(x, as)};
      const Tensor y = binary_conv2d(wst, ast, merge_coefficients(wp.alpha, as.beta), stride, pad);
      const Tensor ref = oracle::conv2d(xq, wq, stride, pad);
      CAPTURE(trial);
      CHECK(y.shape() == ref.shape());
      CHECK(max_relative_error(y, ref) < 1e-4);
      CHECK(max_relative_error(conv2d_reference(xq, wq, stride, pad), ref) < 1e-5);
    }
  }

  TEST_CASE("binary convolution does not depend on the worker count") {
    std::mt19937_64 rng(23);
    const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng, 0.3f);
    const Tensor x = oracle::random_tensor({5, 3, 9, 9}, rng);
    const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(4));
    const ActivationQuantizerState as = init_activation_state(x, 5);
    const PlaneStack wst{w.shape(), decompose_weight_bases(w, wp.u)};
    const PlaneStack ast{x.shape(), decompose_activation_bases(x, as)};
    const auto phi = merge_coefficients(wp.alpha, as.beta);
    const char* saved = std::getenv("PA_THREADS");
    const std::string restore = saved ? saved : "";
    setenv("PA_THREADS", "1", 1);
    const Tensor one = binary_conv2d(wst, ast, phi, 1, 1);
    setenv("PA_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    const Tensor three = binary_conv2d(wst, ast, phi, 1, 1);
    if (saved) setenv("PA_THREADS", restore.c_str(), 1);
    else unsetenv("PA_THREADS");
    CHECK(one == three);
  }

  TEST_CASE("geometry mismatches are rejected") {
    const PlaneStack w{{2, 3, 3, 3}, {BitPlane(54)}};
    const PlaneStack a{{1, 2, 5, 5}, {BitPlane(50)}};
    CHECK_THROWS_AS(binary_conv2d(w, a, merge_coefficients(std::vector<float>{1.0f}, std::vector<float>{1.0f}), 1, 0),
                    std::invalid_argument);
  }

  TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) CHECK(h == 1);
  }
}
