#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "dance/nn/checkpoint.hpp"
#include "dance/nn/gradcheck.hpp"
#include "dance/nn/graph.hpp"
#include "dance/nn/layers.hpp"
#include "dance/nn/optim.hpp"
#include "dance/util.hpp"

using namespace dance;
using namespace dance::nn;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.next_normal();
  return m;
}

}  // namespace

TEST_CASE("relu forward") {
  Graph g;
  Mat x(1, 3);
  x << -1.0, 0.0, 2.0;
  const Var y = g.relu(g.input(x));
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(0, 2) == 2.0);
}

TEST_CASE("residual add with a zero branch is the identity") {
  Graph g;
  Rng rng(1);
  const Mat x = random_mat(3, 4, rng);
  const Var y = residual_add(g, g.input(x), g.input(Mat::Zero(3, 4)));
  CHECK(y.value() == x);
}

TEST_CASE("softmax of a constant row is uniform") {
  Graph g;
  const Var p = g.softmax_rows(g.input(Mat::Zero(1, 3)));
  for (int j = 0; j < 3; ++j) CHECK(p.value()(0, j) == doctest::Approx(1.0 / 3));
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Graph g;
  Rng rng(2);
  const Var p = g.softmax_rows(g.input(random_mat(8, 7, rng, 5.0)));
  for (int r = 0; r < 8; ++r) {
    CHECK(p.value().row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.value().row(r).minCoeff() > 0.0);
  }
}

TEST_CASE("gumbel softmax: zero noise at tau=1 equals softmax") {
  Rng rng(3);
  const Mat logits = random_mat(4, 7, rng);
  Graph g;
  const Var a = g.gumbel_softmax_rows(g.input(logits), 1.0, Mat::Zero(4, 7), false);
  const Var b = g.softmax_rows(g.input(logits));
  CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gumbel softmax: hard mode emits exact one-hots") {
  Rng rng(4);
  const Mat logits = random_mat(5, 7, rng);
  Mat noise(5, 7);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c) noise(r, c) = rng.next_gumbel();

  Graph g;
  const Var p = g.gumbel_softmax_rows(g.input(logits), 0.7, noise, true);
  for (int r = 0; r < 5; ++r) {
    CHECK(p.value().row(r).sum() == doctest::Approx(1.0));
    int ones = 0;
    for (int c = 0; c < 7; ++c) {
      CHECK((p.value()(r, c) == 0.0 || p.value()(r, c) == 1.0));
      ones += p.value()(r, c) == 1.0;
    }
    CHECK(ones == 1);
  }
}

TEST_CASE("gumbel softmax: lower temperature sharpens the distribution") {
  Rng rng(5);
  const Mat logits = random_mat(1, 7, rng);
  Mat noise(1, 7);
  for (int c = 0; c < 7; ++c) noise(0, c) = rng.next_gumbel();

  Graph g;
  const Var cold = g.gumbel_softmax_rows(g.input(logits), 0.1, noise, false);
  const Var hot = g.gumbel_softmax_rows(g.input(logits), 10.0, noise, false);
  CHECK(cold.value().maxCoeff() >= hot.value().maxCoeff());
}

TEST_CASE("gumbel softmax rejects non-positive temperature") {
  Graph g;
  const Var x = g.input(Mat::Zero(1, 3));
  CHECK_THROWS_AS(g.gumbel_softmax_rows(x, 0.0, Mat::Zero(1, 3), false), std::invalid_argument);
}

TEST_CASE("msre: hand values") {
  {
    Graph g;
    Mat y(1, 1), yhat(1, 1);
    y << 10.0;
    yhat << 5.0;
    CHECK(g.msre(g.input(yhat), y).value()(0, 0) == doctest::Approx(0.25));
  }
  {
    Graph g;
    Mat y(1, 2), yhat(1, 2);
    y << 8.0, 100.0;
    yhat << 18.0, 110.0;
    CHECK(g.msre(g.input(yhat), y).value()(0, 0) == doctest::Approx(1.5725));
  }
  {
    Graph g;
    Mat y(1, 3);
    y << 1.0, 2.0, 3.0;
    CHECK(g.msre(g.input(y), y).value()(0, 0) == 0.0);
  }
  {
    Graph g;
    Mat y(1, 1), yhat(1, 1);
    y << 0.0;
    yhat << 1.0;
    CHECK_THROWS_AS(g.msre(g.input(yhat), y), std::invalid_argument);
  }
}

TEST_CASE("cross entropy: uniform logits give ln(k), confident logits approach 0") {
  {
    Graph g;
    CHECK(g.ce_with_logits(g.input(Mat::Zero(1, 3)), {1}).value()(0, 0) ==
          doctest::Approx(std::log(3.0)));
  }
  {
    Graph g;
    Mat logits = Mat::Zero(1, 5);
    logits(0, 2) = 50.0;
    CHECK(g.ce_with_logits(g.input(logits), {2}).value()(0, 0) < 1e-9);
  }
  {
    Graph g;
    CHECK_THROWS_AS(g.ce_with_logits(g.input(Mat::Zero(1, 3)), {3}), std::invalid_argument);
  }
}

TEST_CASE("multi-head cross entropy sums per-head means and hits 0 when perfect") {
  Graph g;
  Mat h1 = Mat::Zero(2, 3), h2 = Mat::Zero(2, 4);
  h1(0, 0) = h1(1, 2) = 60.0;
  h2(0, 1) = h2(1, 3) = 60.0;
  const Var loss =
      ce_loss_multi_head(g, {g.input(h1), g.input(h2)}, {{0, 2}, {1, 3}});
  CHECK(loss.value()(0, 0) < 1e-9);
}

TEST_CASE("gradcheck: quadratic sanity") {
  Param x(Mat::Constant(1, 1, 3.0));
  auto loss = [&] { return x.value(0, 0) * x.value(0, 0); };
  auto compute = [&] {
    x.zero_grad();
    Graph g;
    const Var v = g.param(x);
    const Var l = g.mul(v, v);
    g.backward(l);
    return l.value()(0, 0);
  };
  const auto report = gradcheck(loss, {{"x", &x}}, compute);
  CHECK(report.passed(1e-6));
  compute();
  CHECK(x.grad(0, 0) == doctest::Approx(6.0));
}

// Shared harness: scalar head e(z) = sum of squares keeps every op's
// gradient visible to the finite-difference probe.
namespace {

struct TwoLayerNet {
  DenseLayer l1, l2;
  Mat x;
  Mat targets;

  TwoLayerNet(Rng& rng) : l1(6, 5, rng), l2(5, 3, rng) {
    x = random_mat(4, 6, rng);
    targets = random_mat(4, 3, rng).array().abs() + 1.0;
  }

  double run(bool backward) {
    Graph g;
    Var h = g.relu(l1.forward(g, g.input(x)));
    Var yhat = g.exp(l2.forward(g, h));
    Var loss = g.msre(yhat, targets);
    if (backward) g.backward(loss);
    return loss.value()(0, 0);
  }

  std::vector<std::pair<std::string, Param*>> blocks() {
    return {{"l1.w", &l1.weight}, {"l1.b", &l1.bias}, {"l2.w", &l2.weight}, {"l2.b", &l2.bias}};
  }

  void zero() {
    l1.weight.zero_grad();
    l1.bias.zero_grad();
    l2.weight.zero_grad();
    l2.bias.zero_grad();
  }
};

}  // namespace

TEST_CASE("gradcheck: dense + relu + exp + msre network") {
  Rng rng(7);
  TwoLayerNet net(rng);
  auto loss = [&] { return net.run(false); };
  auto compute = [&] {
    net.zero();
    return net.run(true);
  };
  const auto report = gradcheck(loss, net.blocks(), compute);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: batch norm in both modes") {
  Rng rng(8);
  DenseLayer dense(5, 4, rng);
  BatchNormLayer bn(4);
  bn.update_running_stats = false;
  // non-trivial running stats for eval mode
  bn.running_mean = random_mat(1, 4, rng, 0.5);
  bn.running_var = random_mat(1, 4, rng).array().abs() + 0.5;
  const Mat x = random_mat(6, 5, rng);
  const std::vector<int> labels = {0, 3, 1, 2, 0, 1};

  for (const bool training : {true, false}) {
    auto run = [&](bool backward) {
      Graph g;
      Var h = dense.forward(g, g.input(x));
      Var y = bn.forward(g, h, training);
      Var loss = g.ce_with_logits(y, labels);
      if (backward) g.backward(loss);
      return loss.value()(0, 0);
    };
    auto loss = [&] { return run(false); };
    auto compute = [&] {
      dense.weight.zero_grad();
      dense.bias.zero_grad();
      bn.gamma.zero_grad();
      bn.beta.zero_grad();
      return run(true);
    };
    const auto report = gradcheck(
        loss,
        {{"w", &dense.weight}, {"b", &dense.bias}, {"gamma", &bn.gamma}, {"beta", &bn.beta}},
        compute);
    INFO("training mode = ", training);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("gradcheck: gumbel softmax with frozen noise") {
  Rng rng(9);
  DenseLayer dense(4, 7, rng);
  const Mat x = random_mat(3, 4, rng);
  Mat noise(3, 7);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 7; ++c) noise(r, c) = rng.next_gumbel();
  const Mat targets = random_mat(3, 7, rng).array().abs() + 0.5;

  auto run = [&](bool backward) {
    Graph g;
    Var logits = dense.forward(g, g.input(x));
    Var p = g.gumbel_softmax_rows(logits, 0.8, noise, false);
    // keep the loss sensitive to every component
    Var loss = g.msre(p, targets);
    if (backward) g.backward(loss);
    return loss.value()(0, 0);
  };
  auto loss = [&] { return run(false); };
  auto compute = [&] {
    dense.weight.zero_grad();
    dense.bias.zero_grad();
    return run(true);
  };
  const auto report = gradcheck(loss, {{"w", &dense.weight}, {"b", &dense.bias}}, compute);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: structural ops (concat, slice, scale_by, residual)") {
  Rng rng(10);
  DenseLayer a(3, 4, rng), b(3, 4, rng);
  const Mat x = random_mat(2, 3, rng);
  const Mat targets = random_mat(2, 4, rng).array().abs() + 1.0;

  auto run = [&](bool backward) {
    Graph g;
    Var xa = a.forward(g, g.input(x));
    Var xb = b.forward(g, g.input(x));
    Var cat = g.concat_cols(xa, xb);          // [2 x 8]
    Var left = g.slice_cols(cat, 0, 4);
    Var right = g.slice_cols(cat, 4, 4);
    Var weight = g.elem(cat, 0, 0);
    Var mix = g.add(g.scale_by(left, weight), g.scale(right, 0.5));
    Var res = residual_add(g, mix, xa);
    Var pos = g.exp(res);
    Var loss = g.msre(pos, targets);
    if (backward) g.backward(loss);
    return loss.value()(0, 0);
  };
  auto loss = [&] { return run(false); };
  auto compute = [&] {
    a.weight.zero_grad();
    a.bias.zero_grad();
    b.weight.zero_grad();
    b.bias.zero_grad();
    return run(true);
  };
  const auto report = gradcheck(
      loss, {{"a.w", &a.weight}, {"a.b", &a.bias}, {"b.w", &b.weight}, {"b.b", &b.bias}},
      compute);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: nll on gumbel output probabilities") {
  Rng rng(11);
  DenseLayer dense(5, 4, rng);
  const Mat x = random_mat(3, 5, rng);
  Mat noise(3, 4);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) noise(r, c) = rng.next_gumbel();
  const std::vector<int> labels = {1, 0, 3};

  auto run = [&](bool backward) {
    Graph g;
    Var p = g.gumbel_softmax_rows(dense.forward(g, g.input(x)), 2.0, noise, false);
    Var loss = g.nll_rows(p, labels);
    if (backward) g.backward(loss);
    return loss.value()(0, 0);
  };
  auto loss = [&] { return run(false); };
  auto compute = [&] {
    dense.weight.zero_grad();
    dense.bias.zero_grad();
    return run(true);
  };
  const auto report = gradcheck(loss, {{"w", &dense.weight}, {"b", &dense.bias}}, compute);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("optimizers: zero lr and zero grads are no-ops") {
  Rng rng(12);
  Param p(random_mat(3, 3, rng));
  const Mat before = p.value;

  SgdOptimizer sgd({&p}, SgdConfig{0.0, 0.9, 0.0, true});
  p.grad = random_mat(3, 3, rng);
  sgd.step();
  CHECK(p.value == before);

  AdamOptimizer adam({&p}, AdamConfig{0.1});
  p.zero_grad();
  adam.step();
  CHECK(p.value == before);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("optimizers: SGD descends a quadratic, Adam too") {
  Param p(Mat::Constant(1, 1, 4.0));
  SgdOptimizer sgd({&p}, SgdConfig{0.1});
  for (int i = 0; i < 100; ++i) {
    p.zero_grad();
    p.grad(0, 0) = 2.0 * p.value(0, 0);
    sgd.step();
  }
  CHECK(std::abs(p.value(0, 0)) < 1e-6);

  Param q(Mat::Constant(1, 1, 4.0));
  AdamOptimizer adam({&q}, AdamConfig{0.1});
  for (int i = 0; i < 300; ++i) {
    q.zero_grad();
    q.grad(0, 0) = 2.0 * q.value(0, 0);
    adam.step();
  }
  CHECK(std::abs(q.value(0, 0)) < 1e-3);
}

TEST_CASE("optimizer guards against non-finite updates") {
  Param p(Mat::Constant(1, 1, 1.0));
  SgdOptimizer sgd({&p}, SgdConfig{1.0});
  p.grad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sgd.step(), std::runtime_error);
}

TEST_CASE("lr schedules: step decay recipe and cosine endpoints") {
  CHECK(step_decay_lr(0.001, 0.1, 50, 0) == doctest::Approx(0.001));
  CHECK(step_decay_lr(0.001, 0.1, 50, 49) == doctest::Approx(0.001));
  CHECK(step_decay_lr(0.001, 0.1, 50, 50) == doctest::Approx(0.0001));
  CHECK(step_decay_lr(0.001, 0.1, 50, 149) == doctest::Approx(0.00001));

  CHECK(cosine_lr(0.025, 0, 120) == doctest::Approx(0.025));
  CHECK(cosine_lr(0.025, 60, 120) == doctest::Approx(0.0125));
  CHECK(cosine_lr(0.025, 120, 120) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("training is deterministic given the seed") {
  auto train_once = [](std::uint64_t seed) {
    Rng rng(seed);
    DenseLayer l1(4, 8, rng), l2(8, 2, rng);
    SgdOptimizer opt({&l1.weight, &l1.bias, &l2.weight, &l2.bias}, SgdConfig{0.05, 0.9});
    const Mat x = random_mat(16, 4, rng);
    std::vector<int> labels(16);
    for (auto& l : labels) l = static_cast<int>(rng.next_int(0, 1));
    double last = 0;
    for (int epoch = 0; epoch < 20; ++epoch) {
      opt.zero_grad();
      Graph g;
      Var out = l2.forward(g, g.relu(l1.forward(g, g.input(x))));
      Var loss = g.ce_with_logits(out, labels);
      g.backward(loss);
      opt.step();
      last = loss.value()(0, 0);
    }
    return std::pair{last, l1.weight.value};
  };
  const auto [loss_a, w_a] = train_once(2024);
  const auto [loss_b, w_b] = train_once(2024);
  CHECK(loss_a == loss_b);
  CHECK(w_a == w_b);
}

TEST_CASE("checkpoint: byte-stable round trip with tensors, strings, rng state") {
  Rng rng(13);
  TensorStore store;
  store.put("w1", random_mat(4, 6, rng));
  store.put("running_var", random_mat(1, 6, rng).array().abs().matrix());
  std::ostringstream engine_state;
  engine_state << rng.engine();
  store.put_string("rng", engine_state.str());
  store.put_string("meta", "{\"epochs\":3}");

  const std::string p1 = "test_ckpt_1.bin";
  const std::string p2 = "test_ckpt_2.bin";
  store.save(p1);
  TensorStore loaded = TensorStore::load(p1);
  CHECK(loaded.get("w1") == store.get("w1"));
  CHECK(loaded.get_string("meta") == store.get_string("meta"));

  std::istringstream in(loaded.get_string("rng"));
  std::mt19937_64 engine;
  in >> engine;
  CHECK(engine() == rng.engine()());

  loaded.save(p2);
  CHECK(read_text_file(p1) == read_text_file(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());

  CHECK_THROWS_AS(store.get("missing"), std::runtime_error);
}
