#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rrm/gnn.hpp"

using namespace rrm;

namespace {

GnnHyper small_hyper() {
  GnnHyper h;
  h.features = {1, 6, 5};
  return h;
}

}  // namespace

TEST_CASE("hyperparameters are validated") {
  GnnHyper h;
  CHECK_NOTHROW(h.validate());
  h.features = {1};
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h.features = {1, 0};
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h = GnnHyper{};
  h.temperature = 0.0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}

TEST_CASE("initialization is seeded and bounded by the fan-in") {
  const GnnParams a = GnnParams::initialize(GnnHyper{}, 7);
  const GnnParams b = GnnParams::initialize(GnnHyper{}, 7);
  const GnnParams c = GnnParams::initialize(GnnHyper{}, 8);
  CHECK(a.layers[1].self == b.layers[1].self);
  CHECK(!(a.layers[1].self == c.layers[1].self));
  for (double v : a.layers[0].neighbor.values()) CHECK(std::abs(v) <= 1.0);
  for (double v : a.layers[1].center.values()) CHECK(std::abs(v) <= std::sqrt(1.0 / 64.0));
  for (double v : a.power_head) CHECK(std::abs(v) <= std::sqrt(1.0 / 64.0));
  CHECK(a.num_parameters() == 3 * 64 + 3 * 64 * 64 + 2 * 64);
  CHECK(a.same_shape(b));
  CHECK(!a.same_shape(GnnParams::zeros(small_hyper())));
}

TEST_CASE("identity first layer passes nonnegative input through") {
  GnnHyper h;
  h.features = {1, 1};
  GnnParams p = GnnParams::zeros(h);
  p.layers[0].self(0, 0) = 1.0;
  std::mt19937_64 rng(1);
  const auto inst = oracle::random_instance(2, 5, rng);
  const RrmGraph g = build_graph(inst.h2, inst.assoc, inst.pf, oracle::radio());
  const Matrix s = forward(g, p);
  for (int j = 0; j < 5; ++j) CHECK(s(j, 0) == inst.pf[j]);
}

TEST_CASE("equal center and neighbor weights cancel on self-loops") {
  GnnHyper h;
  h.features = {1, 3};
  GnnParams p = GnnParams::initialize(h, 4);
  p.layers[0].neighbor = p.layers[0].center;
  const Association a = Association::from_serving({0, 0, 0}, 1);
  Matrix h2(1, 3, 1e-8);
  h2(0, 1) = 3e-9;
  const std::vector<double> pf{0.5, -1.0, 2.0};
  const Matrix s = forward(build_graph(h2, a, pf, oracle::radio()), p);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      const double z = pf[j] * p.layers[0].self(0, k);
      CHECK(s(j, k) == doctest::Approx(z > 0 ? z : 0.01 * z).epsilon(1e-14));
    }
}

TEST_CASE("forward and heads match the scalar oracle") {
  std::mt19937_64 rng(21);
  const RadioConstants r = oracle::radio();
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int n = m + static_cast<int>(rng() % 6);
    const auto inst = oracle::random_instance(m, n, rng);
    const GnnParams p = GnnParams::initialize(GnnHyper{}, rng());
    const Matrix s = forward(build_graph(inst.h2, inst.assoc, inst.pf, r), p);
    const Matrix ref = oracle::forward(inst.h2, inst.assoc, inst.pf, p, r);
    CHECK(oracle::norm_rel_diff(oracle::flat(s), oracle::flat(ref)) < 1e-12);
    CHECK(oracle::max_rel_diff(power_head(s, inst.assoc, p, r.p_max_mw), oracle::power(ref, inst.assoc, p, r.p_max_mw)) <
          1e-12);
    CHECK(oracle::max_rel_diff(selection_head(s, inst.assoc, p), oracle::gamma(ref, inst.assoc, p)) < 1e-12);
  }
}

TEST_CASE("forward rejects a feature width mismatch") {
  GnnHyper h;
  h.features = {2, 4};
  const GnnParams p = GnnParams::zeros(h);
  std::mt19937_64 rng(2);
  const auto inst = oracle::random_instance(2, 3, rng);
  CHECK_THROWS_AS(forward(build_graph(inst.h2, inst.assoc, inst.pf, oracle::radio()), p), std::invalid_argument);
}

TEST_CASE("power head") {
  GnnHyper h;
  h.features = {1, 2};
  GnnParams p = GnnParams::zeros(h);
  const Association a = Association::from_serving({0, 0, 0, 1}, 2);
  Matrix s(4, 2);
  s(0, 0) = 1.0;
  s(1, 0) = 2.0;
  s(2, 1) = 3.0;
  s(3, 0) = -4.0;
  CHECK(power_head(s, a, p, 10.0) == std::vector<double>{5.0, 5.0});

  p.power_head = {0.5, -1.0};
  const double pre0 = (0.5 * 1.0 + 0.5 * 2.0 - 1.0 * 3.0) / 3.0;
  const auto pw = power_head(s, a, p, 10.0);
  CHECK(pw[0] == doctest::Approx(10.0 / (1.0 + std::exp(-pre0))).epsilon(1e-15));
  CHECK(pw[1] == doctest::Approx(10.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));

  p.power_head = {1e6, 0.0};
  const auto hi = power_head(s, a, p, 10.0);
  CHECK(hi[0] == 10.0);
  CHECK(hi[1] == 0.0);
}

TEST_CASE("selection head") {
  GnnHyper h;
  h.features = {1, 1};
  GnnParams p = GnnParams::zeros(h);
  p.selection_head = {1.0};
  const Association a = Association::from_serving({0, 0, 0, 1, 1}, 2);
  Matrix s(5, 1, 2.0);
  const auto eq = selection_head(s, a, p);
  for (int j = 0; j < 3; ++j) CHECK(eq[j] == doctest::Approx(1.0 / 3.0));
  CHECK(eq[3] == doctest::Approx(0.5));

  s(1, 0) = 2.5;
  p.hyper.temperature = 1e-3;
  const auto cold = selection_head(s, a, p);
  CHECK(cold[1] > 0.999);

  p.hyper.temperature = 10.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (double& v : s.values()) v = u(rng);
  const auto g = selection_head(s, a, p);
  for (const auto& cell : a.cells) {
    double total = 0.0;
    for (int j : cell) total += g[j];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  }
  // Large logits stay finite thanks to max subtraction.
  const auto big = cell_softmax(std::vector<double>{1000.0, 999.0, -3.0, 800.0, 801.0}, a);
  for (double v : big) CHECK(std::isfinite(v));
}

TEST_CASE("sampling") {
  const Association a = Association::from_serving({0, 0, 0, 1, 1}, 2);
  std::mt19937_64 rng(99);
  const std::vector<double> certain{1.0, 0.0, 0.0, 0.5, 0.5};
  int first = 0;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const auto sel = sample_selection(certain, a, rng);
    CHECK(sel[0] == 1);
    CHECK(sel[0] + sel[1] + sel[2] == 1);
    CHECK(sel[3] + sel[4] == 1);
    first += sel[3];
  }
  CHECK(std::abs(static_cast<double>(first) / draws - 0.5) < 0.01);

  std::mt19937_64 r1(5), r2(5);
  const std::vector<double> g{0.2, 0.3, 0.5, 0.9, 0.1};
  CHECK(sample_selection(g, a, r1) == sample_selection(g, a, r2));

  const auto am = argmax_selection(std::vector<double>{0.4, 0.4, 0.2, 0.3, 0.7}, a);
  CHECK(am == std::vector<int>{1, 0, 0, 0, 1});
}

TEST_CASE("log policy probability") {
  const std::vector<double> g{0.5, 0.5, 0.5, 0.5};
  CHECK(log_policy_prob(g, std::vector<int>{1, 0, 0, 1}) == doctest::Approx(2.0 * std::log(0.5)));
  CHECK(log_policy_prob(std::vector<double>{1.0, 0.0, 1.0}, std::vector<int>{1, 0, 1}) == 0.0);
  CHECK(log_policy_prob(std::vector<double>{0.0, 1.0}, std::vector<int>{1, 0}) == kLogZeroSentinel);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> probs(6);
  for (double& v : probs) v = u(rng);
  const std::vector<int> sel{1, 0, 1, 0, 0, 1};
  double product = 1.0;
  for (int j = 0; j < 6; ++j)
    if (sel[j]) product *= probs[j];
  CHECK(log_policy_prob(probs, sel) == doctest::Approx(std::log(product)).epsilon(1e-14));
}

TEST_CASE("power gradient vanishes with zero multipliers and is positive on a single link") {
  std::mt19937_64 rng(30);
  const RadioConstants r = oracle::radio();
  const auto inst = oracle::random_instance(3, 6, rng);
  const GnnParams p = GnnParams::initialize(small_hyper(), 1);
  const RrmGraph g = build_graph(inst.h2, inst.assoc, inst.pf, r);
  const std::vector<PowerLossTerm> zero{{g, inst.h2, inst.assoc, inst.selection, std::vector<double>(6, 0.0), 1.0}};
  const Gradients gz = grad_power_loss(zero, p, r);
  for (const auto& b : gz.blocks())
    for (double v : b) CHECK(v == 0.0);

  // One AP, one user: d f / d b_p = f'(p) * Pmax sigma' * s, so its sign follows s.
  Matrix h(1, 1, 1e-9);
  const Association one = Association::from_serving({0}, 1);
  const std::vector<double> pf{2.0};
  const RrmGraph g1 = build_graph(h, one, pf, r);
  const Matrix s = forward(g1, p);
  const std::vector<PowerLossTerm> single{{g1, h, one, {1}, {1.0}, 1.0}};
  const Gradients gs = grad_power_loss(single, p, r);
  for (std::size_t k = 0; k < s.cols(); ++k) {
    if (s(0, k) > 0) CHECK(gs.power_head[k] > 0.0);
    if (s(0, k) < 0) CHECK(gs.power_head[k] < 0.0);
  }
  for (double v : gs.selection_head) CHECK(v == 0.0);
}

TEST_CASE("selection gradient vanishes for zero score and singleton cells") {
  std::mt19937_64 rng(31);
  const RadioConstants r = oracle::radio();
  const auto inst = oracle::random_instance(3, 7, rng);
  const GnnParams p = GnnParams::initialize(small_hyper(), 2);
  const RrmGraph g = build_graph(inst.h2, inst.assoc, inst.pf, r);
  const std::vector<SelectionLossTerm> zero{{g, inst.assoc, inst.selection, 0.0, 1.0}};
  const Gradients g0 = grad_selection_loss(zero, p);
  for (const auto& b : g0.blocks())
    for (double v : b) CHECK(v == 0.0);

  const auto single = oracle::random_instance(4, 4, rng);
  const RrmGraph gs = build_graph(single.h2, single.assoc, single.pf, r);
  const std::vector<SelectionLossTerm> term{{gs, single.assoc, single.selection, 3.0, 1.0}};
  CHECK(selection_surrogate(term, p) == 0.0);
  const Gradients g1 = grad_selection_loss(term, p);
  for (const auto& b : g1.blocks())
    for (double v : b) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 rng(77);
  const RadioConstants r = oracle::radio();
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int rep = 0; rep < 4; ++rep) {
    const int m = 2 + rep % 2;
    const int n = m + 3;
    const auto a = oracle::random_instance(m, n, rng);
    const auto b = oracle::random_instance(m, n, rng);
    const GnnParams p = GnnParams::initialize(small_hyper(), rng());
    const RrmGraph ga = build_graph(a.h2, a.assoc, a.pf, r);
    const RrmGraph gb = build_graph(b.h2, b.assoc, b.pf, r);
    std::vector<double> la(n), lb(n);
    for (double& v : la) v = lam(rng);
    for (double& v : lb) v = lam(rng);
    const std::vector<PowerLossTerm> pterms{{ga, a.h2, a.assoc, a.selection, la, 0.5},
                                            {gb, b.h2, b.assoc, b.selection, lb, 0.5}};
    const auto rp = oracle::check_gradient(
        p, grad_power_loss(pterms, p, r), [&](const GnnParams& q) { return power_loss(pterms, q, r); }, {&ga, &gb});
    CHECK(rp.checked > 0);
    CHECK_MESSAGE(rp.max_rel_error < 1e-4, "analytic " << rp.worst_analytic << " fd " << rp.worst_fd);

    const std::vector<SelectionLossTerm> sterms{{ga, a.assoc, a.selection, 1.5, 0.5},
                                                {gb, b.assoc, b.selection, -0.7, 0.5}};
    const auto rs = oracle::check_gradient(
        p, grad_selection_loss(sterms, p), [&](const GnnParams& q) { return selection_surrogate(sterms, q); },
        {&ga, &gb});
    CHECK(rs.checked > 0);
    CHECK_MESSAGE(rs.max_rel_error < 1e-4, "analytic " << rs.worst_analytic << " fd " << rs.worst_fd);
  }
}

TEST_CASE("embeddings and heads are permutation equivariant") {
  std::mt19937_64 rng(41);
  const RadioConstants r = oracle::radio();
  const GnnParams p = GnnParams::initialize(GnnHyper{}, 9);
  for (int rep = 0; rep < 5; ++rep) {
    const auto inst = oracle::random_instance(3, 9, rng);
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto moved = oracle::permute_users(inst, perm);
    const Matrix s = forward(build_graph(inst.h2, inst.assoc, inst.pf, r), p);
    const Matrix sp = forward(build_graph(moved.h2, moved.assoc, moved.pf, r), p);
    for (int k = 0; k < 9; ++k)
      for (std::size_t c = 0; c < s.cols(); ++c)
        CHECK(std::abs(sp(k, c) - s(perm[k], c)) <= 1e-10 * std::max(1.0, std::abs(s(perm[k], c))));
    CHECK(oracle::max_rel_diff(power_head(s, inst.assoc, p, r.p_max_mw), power_head(sp, moved.assoc, p, r.p_max_mw)) <
          1e-10);
    const auto g = selection_head(s, inst.assoc, p);
    const auto gp = selection_head(sp, moved.assoc, p);
    for (int k = 0; k < 9; ++k) CHECK(std::abs(gp[k] - g[perm[k]]) <= 1e-10);
  }
}

TEST_CASE("one parameter set runs on any network size") {
  const GnnParams p = GnnParams::initialize(GnnHyper{}, 5);
  std::mt19937_64 rng(8);
  for (auto [m, n] : {std::pair{1, 1}, std::pair{2, 9}, std::pair{10, 50}}) {
    const auto inst = oracle::random_instance(m, n, rng);
    const Matrix s = forward(build_graph(inst.h2, inst.assoc, inst.pf, oracle::radio()), p);
    CHECK(s.rows() == static_cast<std::size_t>(n));
    CHECK(s.cols() == 64);
  }
}

TEST_CASE("parameter arithmetic") {
  GnnParams a = GnnParams::initialize(small_hyper(), 1);
  const GnnParams b = GnnParams::initialize(small_hyper(), 2);
  GnnParams c = a;
  c.add_scaled(b, 2.0);
  CHECK(c.layers[0].self(0, 1) == doctest::Approx(a.layers[0].self(0, 1) + 2.0 * b.layers[0].self(0, 1)));
  CHECK(c.selection_head[3] == doctest::Approx(a.selection_head[3] + 2.0 * b.selection_head[3]));
  c.set_zero();
  CHECK(c.power_head[0] == 0.0);
  CHECK(c.all_finite());
  c.power_head[1] = std::nan("");
  CHECK(!c.all_finite());
  CHECK_THROWS_AS(a.add_scaled(GnnParams::zeros(GnnHyper{}), 1.0), std::invalid_argument);
}
