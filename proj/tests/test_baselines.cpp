#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rrm/baselines.hpp"

using namespace rrm;

TEST_CASE("PF selection picks the largest ratio per cell") {
  const Association a = Association::from_serving({0, 0, 1, 1, 1}, 2);
  const std::vector<double> pf{3.0, 1.0, 2.0, 5.0, 5.0};
  CHECK(pf_select(pf, a) == std::vector<int>{1, 0, 0, 1, 0});
  std::vector<double> scaled = pf;
  for (double& v : scaled) v *= 7.5;
  CHECK(pf_select(scaled, a) == pf_select(pf, a));
}

TEST_CASE("full reuse with a single link") {
  const RadioConstants r = oracle::radio();
  Matrix h(1, 1, 1e-9);
  const Association a = Association::from_serving({0}, 1);
  const std::vector<double> pf{1.0};
  const RrmDecision d = full_reuse(h, a, pf, r);
  CHECK(d.power == std::vector<double>{r.p_max_mw});
  CHECK(d.gamma_hard == std::vector<int>{1});
  const double expect = std::log2(1.0 + r.p_max_mw * 1e-9 / r.noise_mw);
  CHECK(capacity(h, d.power, d.gamma_hard, a, r.noise_mw)[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("ITLinQ admission") {
  const RadioConstants r = oracle::radio();
  const BaselineParams bp;
  const Association a = Association::from_serving({0, 1}, 2);
  const double scale = r.noise_mw / r.p_max_mw;  // gain giving unit SNR
  Matrix h(2, 2);
  h(0, 0) = 1e6 * scale;
  h(1, 1) = 1e6 * scale;
  SUBCASE("strong mutual interference leaves only the higher-PF link") {
    h(0, 1) = 1e5 * scale;
    h(1, 0) = 1e5 * scale;
    const std::vector<double> pf{1.0, 2.0};
    const RrmDecision d = itlinq(h, a, pf, bp, r);
    CHECK(d.power[0] == 0.0);
    CHECK(d.power[1] == r.p_max_mw);
  }
  SUBCASE("negligible interference admits both") {
    // SNR^0.7 = 10^4.2 >= 10^2.5 * INR when INR <= 10^1.7.
    h(0, 1) = 10.0 * scale;
    h(1, 0) = 10.0 * scale;
    const RrmDecision d = itlinq(h, a, std::vector<double>{1.0, 2.0}, bp, r);
    CHECK(d.power == std::vector<double>{r.p_max_mw, r.p_max_mw});
  }
  SUBCASE("one-sided interference is enough to block") {
    h(0, 1) = 1.0 * scale;
    h(1, 0) = 1e3 * scale;
    const RrmDecision d = itlinq(h, a, std::vector<double>{2.0, 1.0}, bp, r);
    CHECK(d.power[0] == r.p_max_mw);
    CHECK(d.power[1] == 0.0);
  }
  BaselineParams bad;
  bad.itlinq_eta = 1.5;
  CHECK_THROWS_AS(itlinq(h, a, std::vector<double>{1.0, 1.0}, bad, r), std::invalid_argument);
}

TEST_CASE("WMMSE weighted sum-rate never decreases") {
  std::mt19937_64 rng(2024);
  const RadioConstants r = oracle::radio();
  BaselineParams bp;
  bp.wmmse_max_iters = 200;
  bp.wmmse_tol = 1e-12;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = oracle::random_instance(2 + trial % 5, 8, rng);
    const WmmseResult res = wmmse(inst.h2, inst.assoc, inst.selection, inst.pf, bp, r);
    for (std::size_t k = 1; k < res.weighted_sum_rates.size(); ++k)
      CHECK(res.weighted_sum_rates[k] >= res.weighted_sum_rates[k - 1] - 1e-9);
    for (double p : res.power) {
      CHECK(p >= 0.0);
      CHECK(p <= r.p_max_mw);
    }
  }
}

TEST_CASE("WMMSE reaches the grid optimum on two cells") {
  const ChannelParams c;
  const RadioConstants r = RadioConstants::from(c);
  TopologyParams tp;
  tp.num_aps = 2;
  tp.num_ues = 2;
  BaselineParams bp;
  bp.wmmse_max_iters = 1000;
  bp.wmmse_tol = 1e-12;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> pf(0.1, 10.0);
  const auto configs = sample_family(tp, c, 50, 5);
  const std::vector<int> sel{1, 1};
  for (const auto& cfg : configs) {
    const SosFading fading(2, 2, c, static_cast<std::uint64_t>(cfg.id));
    const Matrix h = channel_at(cfg.channel, fading.power_at(3), 3).h_squared;
    const std::vector<double> w{pf(rng), pf(rng)};
    double best = 0.0;
    std::vector<double> p(2);
    for (int a = 0; a <= 100; ++a)
      for (int b = 0; b <= 100; ++b) {
        p[0] = r.p_max_mw * a / 100.0;
        p[1] = r.p_max_mw * b / 100.0;
        const auto f = oracle::capacity(h, p, sel, cfg.channel.assoc, r.noise_mw);
        best = std::max(best, w[0] * f[0] + w[1] * f[1]);
      }
    const WmmseResult res = wmmse(h, cfg.channel.assoc, sel, w, bp, r);
    CHECK(res.weighted_sum_rates.back() >= res.weighted_sum_rates.front());
    CHECK_MESSAGE(res.weighted_sum_rates.back() >= best * (1.0 - 1e-3), "config " << cfg.id);
  }
}

TEST_CASE("WMMSE decision uses PF selection") {
  std::mt19937_64 rng(5);
  const RadioConstants r = oracle::radio();
  const auto inst = oracle::random_instance(3, 9, rng);
  const RrmDecision d = wmmse_decision(inst.h2, inst.assoc, inst.pf, BaselineParams{}, r);
  CHECK(d.gamma_hard == pf_select(inst.pf, inst.assoc));
  CHECK(satisfies_constraints(d, inst.assoc, r.p_max_mw));
  CHECK_THROWS_AS(wmmse(inst.h2, inst.assoc, std::vector<int>(9, 0), inst.pf, BaselineParams{}, r),
                  std::invalid_argument);
}
