#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracle.hpp"
#include "pa/weight_quantizer.hpp"

using namespace pa;

namespace {

Tensor sixteen_weights() {
  return Tensor({1, 1, 4, 4}, {-3.0f, -2.0f, -1.2f, -0.7f, -0.3f, -0.1f, 0.0f, 0.05f, 0.2f, 0.4f, 0.6f, 0.9f, 1.3f,
                               2.2f, 2.8f, 3.5f});
}

}  // namespace

TEST_SUITE("weight-quantizer") {
  TEST_CASE("eight-piece multipliers are the fixed table") {
    const auto m = WeightQuantizerConfig::default_multipliers(8);
    const std::vector<float> expected{-1.5f, -1.0f, -0.5f, -0.25f, 0.25f, 0.5f, 1.0f, 1.5f};
    CHECK(m == expected);
    const auto u = weight_endpoints(WeightQuantizerConfig::with_pieces(8), 2.0f);
    const std::vector<float> scaled{-3.0f, -2.0f, -1.0f, -0.5f, 0.5f, 1.0f, 2.0f, 3.0f};
    CHECK(u == scaled);
  }

  TEST_CASE("other piece counts use a symmetric linear grid") {
    CHECK(WeightQuantizerConfig::default_multipliers(2) == std::vector<float>{-0.25f, 0.25f});
    const auto m4 = WeightQuantizerConfig::default_multipliers(4);
    CHECK(m4 == std::vector<float>{-2.0f, -0.25f, 0.25f, 2.0f});
    const auto m6 = WeightQuantizerConfig::default_multipliers(6);
    REQUIRE(m6.size() == 6);
    CHECK(m6[3] == doctest::Approx(0.25));
    CHECK(m6[4] == doctest::Approx(1.125));
    CHECK(m6[5] == doctest::Approx(2.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(m6[i] == -m6[5 - i]);
  }

  TEST_CASE("odd or zero piece counts are rejected") {
    CHECK_THROWS_AS(WeightQuantizerConfig::with_pieces(3), std::invalid_argument);
    CHECK_THROWS_AS(WeightQuantizerConfig::with_pieces(0), std::invalid_argument);
    WeightQuantizerConfig bad = WeightQuantizerConfig::with_pieces(4);
    bad.endpoint_multipliers = {-1.0f, 0.5f, 0.25f, 1.0f};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("frozen sixteen-element fit") {
    const Tensor w = sixteen_weights();
    const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(8));
    CHECK(wp.sigma == doctest::Approx(1.6138287880922064).epsilon(1e-6));
    const std::vector<double> alpha{-3.0, -2.0, -1.2, -0.7, 0.6, 1.1, 2.2, 3.15};
    REQUIRE(wp.alpha.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(wp.alpha[i] == doctest::Approx(alpha[i]).epsilon(1e-6));
    CHECK(wp.empty_pieces == 0);
    const Tensor q = quantize_weights_forward(w, wp);
    const std::vector<double> expected{-3.0, -2.0, -1.2, -0.7, 0, 0, 0, 0, 0, 0, 0.6, 1.1, 1.1, 2.2, 3.15, 3.15};
    for (std::size_t j = 0; j < 16; ++j) CHECK(q[j] == doctest::Approx(expected[j]).epsilon(1e-6));
  }

  TEST_CASE("endpoints are lower-closed") {
    const std::vector<float> u{-2.0f, -1.0f, 1.0f, 2.0f};
    CHECK(piece_index(-2.0f, u) == 1);
    CHECK(piece_index(-1.0f, u) == kDeadZone);
    CHECK(piece_index(1.0f, u) == 2);
    CHECK(piece_index(2.0f, u) == 3);
    CHECK(piece_index(-2.5f, u) == 0);
    for (float w : {-3.0f, -2.0f, -1.5f, -1.0f, 0.0f, 1.0f, 1.5f, 2.0f, 9.0f}) {
      const int p = piece_index(w, u);
      CHECK(oracle::weight_piece(w, u) == (p == kDeadZone ? 0 : p + 1));
    }
  }

  TEST_CASE("empty pieces fall back to interval midpoints") {
    const Tensor w({1, 1, 1, 4}, {-0.1f, 0.0f, 0.05f, 0.1f});
    const std::vector<float> u{-2.0f, -1.0f, 1.0f, 2.0f};
    const ScalingFit fit = fit_scaling_coefficients(w, u, 0.5f);
    CHECK(fit.empty_pieces == 4);
    CHECK(fit.dead_zone == 4);
    CHECK(fit.alpha == std::vector<float>{-2.25f, -1.5f, 1.5f, 2.25f});
  }

  TEST_CASE("constant tensor uses the guarded sigma") {
    const Tensor w({1, 1, 2, 2}, 0.5f);
    const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(4));
    CHECK(wp.sigma == kSigmaEpsilon);
    for (std::size_t i = 1; i < wp.u.size(); ++i) CHECK(wp.u[i] > wp.u[i - 1]);
    const Tensor q = quantize_weights_forward(w, wp);
    for (float x : q.values()) CHECK(x == doctest::Approx(0.5));
  }

  TEST_CASE("non-finite weights are rejected") {
    Tensor w({1, 1, 1, 3}, {0.0f, std::numeric_limits<float>::quiet_NaN(), 1.0f});
    CHECK_THROWS_AS(fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(4)), std::invalid_argument);
  }

  TEST_CASE("backward endpoints are midpoints") {
    const std::vector<float> u{-3.0f, -1.0f, 1.0f, 5.0f};
    CHECK(backward_endpoints(u) == std::vector<float>{-2.0f, 0.0f, 3.0f});
  }

  TEST_CASE("backward slope matches the piece table for every piece count") {
    std::mt19937_64 rng(7);
    for (std::size_t m : {2u, 4u, 6u, 8u}) {
      const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng, 0.3f);
      const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(m, 1.7f));
      std::vector<float> probes;
      for (float s : wp.s)
        for (float d : {-1e-3f, 0.0f, 1e-3f}) probes.push_back(s + d);
      std::uniform_real_distribution<float> span(-1.5f, 1.5f);
      for (int k = 0; k < 200; ++k) probes.push_back(span(rng));
      for (float x : probes) {
        CAPTURE(m);
        CAPTURE(x);
        CHECK(weight_backward_slope(x, wp, 1.7f) == doctest::Approx(oracle::weight_slope(x, wp.alpha, wp.s, 1.7f)));
      }
    }
  }

  TEST_CASE("weight_backward scales the incoming gradient elementwise") {
    std::mt19937_64 rng(3);
    const Tensor w = oracle::random_tensor({2, 2, 3, 3}, rng);
    const Tensor g = oracle::random_tensor({2, 2, 3, 3}, rng);
    const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(8, 0.5f));
    const Tensor gw = weight_backward(g, w, wp, 0.5f);
    for (std::size_t j = 0; j < w.size(); ++j)
      CHECK(gw[j] == doctest::Approx(g[j] * oracle::weight_slope(w[j], wp.alpha, wp.s, 0.5f)));
    CHECK_THROWS_AS(weight_backward(Tensor({1, 1, 1, 2}), w, wp, 0.5f), std::invalid_argument);
  }

  TEST_CASE("property: forward equals the sum of alpha-weighted planes") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t m = 2 * (1 + trial % 4);
      const Tensor w = oracle::random_tensor({static_cast<std::size_t>(1 + trial % 3), 2, 3, 3}, rng, 0.1f + 0.05f * trial);
      const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(m));
      const Tensor q = quantize_weights_forward(w, wp);
      const auto planes = decompose_weight_bases(w, wp.u);
      std::size_t members = 0;
      for (const auto& p : planes) members += p.popcount();
      std::size_t dead = 0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        float sum = 0.0f;
        int hits = 0;
        for (std::size_t i = 0; i < m; ++i)
          if (planes[i].test(j)) {
            sum += wp.alpha[i];
            ++hits;
          }
        CHECK(hits <= 1);
        if (hits == 0) ++dead;
        CHECK(q[j] == sum);
      }
      CHECK(members + dead == w.size());
    }
  }

  TEST_CASE("property: fitted alpha equals the oracle piece mean") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      const Tensor w = oracle::random_tensor({3, 4, 3, 3}, rng, 0.2f);
      const WeightPiecewise wp = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(8));
      const auto expected = oracle::piece_means(w, wp.u, wp.sigma);
      for (std::size_t i = 0; i < 8; ++i) CHECK(wp.alpha[i] == doctest::Approx(expected[i]).epsilon(1e-5));
    }
  }

  TEST_CASE("property: endpoints scale linearly with the tensor") {
    std::mt19937_64 rng(9);
    const Tensor w = oracle::random_tensor({2, 2, 3, 3}, rng);
    Tensor w3 = w;
    for (auto& x : w3.values()) x *= 4.0f;
    const WeightPiecewise a = fit_weight_piecewise(w, WeightQuantizerConfig::with_pieces(8));
    const WeightPiecewise b = fit_weight_piecewise(w3, WeightQuantizerConfig::with_pieces(8));
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(b.u[i] == doctest::Approx(4.0 * a.u[i]).epsilon(1e-5));
      CHECK(b.alpha[i] == doctest::Approx(4.0 * a.alpha[i]).epsilon(1e-5));
    }
  }
}
