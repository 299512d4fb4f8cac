#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hain/common.hpp"
#include "hain/gradcheck.hpp"
#include "hain/model.hpp"
#include "hain/objective.hpp"
#include "hain/rng.hpp"

using namespace hain;

TEST_CASE("cross entropy analytic cases") {
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 0) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy(std::vector<double>{0.0, 1.0}, 1) == doctest::Approx(0.0));
  CHECK(cross_entropy(std::vector<double>{0.9, 0.1}, 1) == doctest::Approx(-std::log(0.1)));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, 2), ContractError);
}

TEST_CASE("cross entropy clamps vanishing probabilities") {
  const double v = cross_entropy(std::vector<double>{1.0, 0.0}, 1);
  CHECK(v == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(v));
}

TEST_CASE("attention entropy boundary cases") {
  CHECK(attention_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(attention_entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
  CHECK(attention_entropy(std::vector<double>{0.75, 0.25}) ==
        doctest::Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))).epsilon(1e-12));
}

TEST_CASE("attention entropy stays in [0, ln n] on random simplices") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_below(12);
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) {
      x = rng.uniform(0.0, 1.0);
      s += x;
    }
    if (s == 0.0) continue;
    for (double& x : v) x /= s;
    const double h = attention_entropy(v);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(double(n)) + 1e-12);
  }
}

TEST_CASE("sparsity is the gate mean") {
  CHECK(sparsity_l1(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(sparsity_l1(std::vector<double>{1.0, 1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(sparsity_l1(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.0 / 3));
}

TEST_CASE("consistency analytic cases") {
  CHECK(consistency(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}) == 0.0);
  CHECK(consistency(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(2.0));
  CHECK(consistency(std::vector<double>{0.6, 0.4}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(0.02));
  CHECK_THROWS_AS(consistency(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}),
                  ShapeError);
}

TEST_CASE("consistency is symmetric and zero only at equality") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(6), b(6);
    for (std::size_t i = 0; i < 6; ++i) {
      a[i] = rng.uniform(0.0, 1.0);
      b[i] = rng.uniform(0.0, 1.0);
    }
    CHECK(consistency(a, b) == doctest::Approx(consistency(b, a)).epsilon(1e-15));
    CHECK(consistency(a, a) == 0.0);
    if (a != b) CHECK(consistency(a, b) > 0.0);
  }
}

namespace {

HainConfig tiny_config() {
  HainConfig cfg;
  cfg.input_dim = 8;
  cfg.embed_dim = 3;
  cfg.group_size = 3;
  cfg.key_dim = 2;
  cfg.hidden_dim = 5;
  cfg.num_classes = 3;
  cfg.reduced_dim = 4;
  cfg.seed = 23;
  return cfg;
}

}  // namespace

TEST_CASE("total loss with zero weights reduces to the prediction term") {
  HainConfig cfg = tiny_config();
  HainParams p = init_params(cfg);
  Rng rng(1);
  std::vector<double> x(cfg.input_dim);
  for (double& v : x) v = rng.normal();
  ForwardOutput out = forward(p, x);
  LossBreakdown b = total_loss(out, 1, LossWeights{});
  CHECK(b.total == b.pred);
}

TEST_CASE("one-hot agreement zeroes the regularizers") {
  ForwardOutput out;
  out.probabilities = {0.2, 0.8};
  out.trace.alpha_combined = {1.0, 0.0, 0.0};
  out.trace.alpha_cross = {1.0, 0.0, 0.0};
  out.trace.gates = {0.5, 0.5, 0.5};
  LossBreakdown b = total_loss(out, 1, LossWeights{1.0, 0.0, 1.0});
  CHECK(b.attn == 0.0);
  CHECK(b.consist == 0.0);
}

TEST_CASE("breakdown recombines and matches the graph values") {
  HainConfig cfg = tiny_config();
  HainParams p = init_params(cfg);
  Rng rng(9);
  const LossWeights w{0.7, 0.35, 1.4};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(cfg.input_dim);
    for (double& v : x) v = rng.normal();
    const std::size_t label = rng.next_below(cfg.num_classes);

    Graph g;
    ParamNodes pn = register_params(g, p);
    ForwardHandles fh = build_forward(g, pn, x);
    LossHandles lh = build_total_loss(g, fh, label, w);
    const LossBreakdown graph_b = lh.breakdown(g);

    // Plain recomputation from the extracted forward output.
    const LossBreakdown plain = total_loss(extract_output(g, fh), label, w);
    CHECK(graph_b.pred == doctest::Approx(plain.pred).epsilon(1e-12));
    CHECK(graph_b.attn == doctest::Approx(plain.attn).epsilon(1e-12));
    CHECK(graph_b.sparse == doctest::Approx(plain.sparse).epsilon(1e-12));
    CHECK(graph_b.consist == doctest::Approx(plain.consist).epsilon(1e-12));
    CHECK(graph_b.total == doctest::Approx(plain.total).epsilon(1e-12));

    // Recombination identity.
    const double recombined = graph_b.pred + w.lambda1 * graph_b.attn +
                              w.lambda2 * graph_b.sparse + w.lambda3 * graph_b.consist;
    CHECK(std::fabs(graph_b.total - recombined) < 1e-12);
    CHECK(graph_b.pred >= 0.0);
    CHECK(graph_b.attn >= 0.0);
    CHECK(graph_b.sparse >= 0.0);
    CHECK(graph_b.consist >= 0.0);
  }
}

TEST_CASE("total loss gradients pass finite differences") {
  HainConfig cfg = tiny_config();
  HainParams p = init_params(cfg);
  Rng rng(12);
  std::vector<double> x(cfg.input_dim);
  for (double& v : x) v = rng.normal();
  const std::size_t label = 0;
  const LossWeights w{0.1, 0.05, 0.2};

  Graph g;
  ParamNodes pn = register_params(g, p);
  ForwardHandles fh = build_forward(g, pn, x);
  LossHandles lh = build_total_loss(g, fh, label, w);
  g.backward(lh.total);

  // Input gradient.
  auto fx = [&](const Matrix2D& cand) {
    std::vector<double> row(cand.data(), cand.data() + cand.size());
    return total_loss(forward(p, row), label, w).total;
  };
  CHECK(finite_diff_check(fx, Matrix2D::column(x), 1e-5, g.grad(fh.input)) < 1e-4);

  // A few parameter gradients (the exhaustive sweep lives in test_model).
  auto views = p.named_matrices();
  for (const char* name : {"feat_embed", "gate_w", "cls_w2", "global_wq"}) {
    std::size_t idx = views.size();
    for (std::size_t m = 0; m < views.size(); ++m)
      if (views[m].first == name) idx = m;
    REQUIRE(idx < views.size());
    auto f = [&](const Matrix2D& cand) {
      HainParams probe = p;
      *probe.named_matrices()[idx].second = cand;
      return total_loss(forward(probe, x), label, w).total;
    };
    INFO("matrix ", name);
    CHECK(finite_diff_check(f, *views[idx].second, 1e-5, g.grad(pn.ids[idx])) < 1e-4);
  }
}
