#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swan/optim.hpp"
#include "test_helpers.hpp"

using namespace swan;
using swan::testing::max_grad_rel_err;
using swan::testing::random_tensor;

TEST_CASE("matmul identity and zeros") {
  Rng rng(1);
  TensorT<double> b = random_tensor({3, 3}, rng);
  TensorT<double> eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.values()[i * 3 + i] = 1.0;
  auto prod = matmul(eye, b);
  for (int64_t i = 0; i < 9; ++i) CHECK(prod.values()[i] == doctest::Approx(b.values()[i]));

  TensorT<double> zero({3, 3});
  auto z = matmul(zero, b);
  for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul against triple-loop oracle, values and both gradients") {
  Rng rng(2);
  auto a = random_tensor({3, 3}, rng);
  auto b = random_tensor({3, 3}, rng);
  auto r = random_tensor({3, 3}, rng);  // fixed weights make the loss scalar

  // oracle: value
  double c_oracle[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        c_oracle[i][j] += a.values()[i * 3 + k] * b.values()[k * 3 + j];

  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto c = matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(c.values()[i * 3 + j] - c_oracle[i][j]) <=
            1e-12 * std::max(1.0, std::abs(c_oracle[i][j])));

  sum(mul(c, r)).backward();
  // oracle: dA[i][k] = sum_j r[i][j] b[k][j], dB[k][j] = sum_i a[i][k] r[i][j]
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double g = 0;
      for (int j = 0; j < 3; ++j) g += r.values()[i * 3 + j] * b.values()[k * 3 + j];
      CHECK(std::abs(a.grad()[i * 3 + k] - g) <= 1e-12 * std::max(1.0, std::abs(g)));
    }
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      double g = 0;
      for (int i = 0; i < 3; ++i) g += a.values()[i * 3 + k] * r.values()[i * 3 + j];
      CHECK(std::abs(b.grad()[k * 3 + j] - g) <= 1e-12 * std::max(1.0, std::abs(g)));
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  TensorT<double> a({2, 3}), b({4, 5});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), Error);
}

TEST_CASE("softmax uniform row and single survivor") {
  TensorT<double> x({1, 3}, {0.0, 0.0, 0.0});
  auto s = softmax_rows(x);
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  TensorT<double> y({1, 2}, {5.0, 5.0});
  Mask m(1, 2);
  m.set(0, 0, true);
  auto sm = softmax_rows(y, &m);
  CHECK(sm.values()[0] == 1.0);
  CHECK(sm.values()[1] == 0.0);
}

TEST_CASE("softmax matches naive exp/sum oracle") {
  Rng rng(3);
  auto x = random_tensor({4, 7}, rng, 2.0);
  auto s = softmax_rows(x);
  for (int r = 0; r < 4; ++r) {
    double denom = 0;
    for (int j = 0; j < 7; ++j) denom += std::exp(x.values()[r * 7 + j]);
    for (int j = 0; j < 7; ++j) {
      const double naive = std::exp(x.values()[r * 7 + j]) / denom;
      CHECK(std::abs(s.values()[r * 7 + j] - naive) <= 1e-12 * naive);
    }
  }
}

TEST_CASE("softmax rows sum to one and masked entries are exactly zero") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = rng.randint(1, 12);
    const int64_t rows = rng.randint(1, 6);
    auto x = random_tensor({rows, n}, rng, 3.0);
    Mask m(rows, n);
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t j = 0; j < n; ++j) m.set(i, j, rng.uniform() < 0.5);
      m.set(i, rng.randint(0, n - 1), true);  // keep the row feasible
    }
    auto s = softmax_rows(x, &m);
    for (int64_t i = 0; i < rows; ++i) {
      double total = 0;
      for (int64_t j = 0; j < n; ++j) {
        if (!m.at(i, j)) CHECK(s.values()[i * n + j] == 0.0);
        total += s.values()[i * n + j];
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("softmax fully masked row reports the row index") {
  TensorT<double> x({2, 3});
  Mask m(2, 3);
  m.set(0, 1, true);
  CHECK_THROWS_WITH_AS(softmax_rows(x, &m), doctest::Contains("row 1"), Error);
}

TEST_CASE("rmsnorm closed-form cases") {
  TensorT<double> gamma({4}, {1, 1, 1, 1});
  TensorT<double> ones({2, 4}, {1, 1, 1, 1, 1, 1, 1, 1});
  auto y = rmsnorm(ones, gamma, 1e-15);
  for (double v : y.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  TensorT<double> zeros({1, 4});
  auto z = rmsnorm(zeros, gamma, 1e-6);
  for (double v : z.values()) CHECK(v == 0.0);

  Rng rng(5);
  auto x = random_tensor({3, 4}, rng);
  auto g = random_tensor({4}, rng);
  const double eps = 1e-5;
  auto out = rmsnorm(x, g, eps);
  for (int r = 0; r < 3; ++r) {
    double ms = 0;
    for (int j = 0; j < 4; ++j) ms += x.values()[r * 4 + j] * x.values()[r * 4 + j];
    ms = ms / 4 + eps;
    for (int j = 0; j < 4; ++j) {
      const double direct = g.values()[j] * x.values()[r * 4 + j] / std::sqrt(ms);
      CHECK(std::abs(out.values()[r * 4 + j] - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("cross entropy trivial and oracle cases") {
  TensorT<double> uniform({2, 4});
  CHECK(cross_entropy(uniform, {1, 3}).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  TensorT<double> confident({1, 3}, {1e6, 0.0, 0.0});
  CHECK(cross_entropy(confident, {0}).item() == doctest::Approx(0.0));

  Rng rng(6);
  auto logits = random_tensor({5, 9}, rng, 2.0);
  std::vector<int> targets;
  for (int t = 0; t < 5; ++t) targets.push_back(static_cast<int>(rng.randint(0, 8)));
  std::vector<double> per_pos;
  const double loss = cross_entropy(logits, targets, &per_pos).item();
  double oracle = 0;
  for (int t = 0; t < 5; ++t) {
    double lse = 0;
    for (int v = 0; v < 9; ++v) lse += std::exp(logits.values()[t * 9 + v]);
    const double nll = std::log(lse) - logits.values()[t * 9 + targets[t]];
    CHECK(std::abs(per_pos[t] - nll) <= 1e-10 * std::max(1.0, std::abs(nll)));
    oracle += nll;
  }
  oracle /= 5;
  CHECK(std::abs(loss - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));

  CHECK_THROWS_WITH_AS(cross_entropy(logits, {0, 1, 2, 9, 4}), doctest::Contains("position 3"),
                       Error);
}

TEST_CASE("backward on simple closed forms") {
  Rng rng(7);
  auto x = random_tensor({6}, rng);
  x.set_requires_grad(true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  auto y = random_tensor({6}, rng);
  y.set_requires_grad(true);
  scale(sum(mul(y, y)), 0.5).backward();
  for (int i = 0; i < 6; ++i) CHECK(y.grad()[i] == doctest::Approx(y.values()[i]).epsilon(1e-12));
}

TEST_CASE("backward contract violations") {
  TensorT<double> x({3});
  x.set_requires_grad(true);
  auto y = mul(x, x);
  CHECK_THROWS_WITH_AS(y.backward(), doctest::Contains("scalar"), Error);

  auto loss = sum(mul(x, x));
  loss.backward();
  CHECK_THROWS_WITH_AS(loss.backward(), doctest::Contains("consumed"), Error);

  TensorT<double> plain = TensorT<double>::scalar(1.0);
  CHECK_THROWS_AS(plain.backward(), Error);
}

TEST_CASE("finite differences across every differentiable op") {
  Rng rng(8);
  auto a = random_tensor({4, 5}, rng);
  auto b = random_tensor({5, 3}, rng);
  auto g = random_tensor({5}, rng, 0.5);
  auto c = random_tensor({4, 5}, rng);

  CHECK(max_grad_rel_err([&] { return sum(matmul(a, b)); }, {a, b}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return sum(mul(softmax_rows(a), c)); }, {a}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return sum(mul(rmsnorm(a, g, 1e-5), c)); }, {a, g}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return sum(silu(a)); }, {a}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return mean(add(mul(a, c), sub(a, c))); }, {a, c}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return sum(scale(reshape(a, {20}), 0.7)); }, {a}) <= 1e-5);
  CHECK(max_grad_rel_err([&] { return cross_entropy(matmul(a, b), {0, 2, 1, 2}); }, {a, b}) <=
        1e-5);

  auto table = random_tensor({7, 3}, rng);
  auto w = random_tensor({4, 3}, rng);
  CHECK(max_grad_rel_err([&] { return sum(mul(embedding(table, {1, 5, 1, 0}), w)); }, {table}) <=
        1e-5);

  Mask m(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, true);
  auto sq = random_tensor({4, 4}, rng);
  auto sr = random_tensor({4, 4}, rng);
  CHECK(max_grad_rel_err([&] { return sum(mul(softmax_rows(sq, &m), sr)); }, {sq}) <= 1e-5);
}

TEST_CASE("embedding rejects out-of-vocab ids with position") {
  TensorT<double> table({4, 2});
  CHECK_THROWS_WITH_AS(embedding(table, {0, 1, 7}), doctest::Contains("position 2"), Error);
}

TEST_CASE("adamw zero-grad and decay-only behavior") {
  TensorT<float> p({3}, {1.0f, -2.0f, 0.5f});
  auto orig = p.clone();
  p.grad();  // zero
  AdamWStateT<float> state;
  AdamWParams hp;
  hp.lr = 1e-2;
  hp.weight_decay = 0.0;
  adamw_step(p, state, hp);
  for (int i = 0; i < 3; ++i) CHECK(p.values()[i] == orig.values()[i]);
  CHECK(state.step_count == 1);

  hp.weight_decay = 0.1;
  adamw_step(p, state, hp);
  for (int i = 0; i < 3; ++i)
    CHECK(p.values()[i] == doctest::Approx(orig.values()[i] * (1.0 - 1e-2 * 0.1)).epsilon(1e-6));
  CHECK(state.step_count == 2);
}

TEST_CASE("adamw single step from zero state matches the hand oracle") {
  TensorT<double> p({2}, {0.3, -0.7});
  auto g = p.grad();
  g[0] = 0.11;
  g[1] = -0.05;
  AdamWStateT<double> state;
  AdamWParams hp;
  hp.lr = 2e-3;
  hp.beta1 = 0.9;
  hp.beta2 = 0.95;
  hp.eps = 1e-8;
  hp.weight_decay = 0.01;
  const double p0[2] = {0.3, -0.7}, gr[2] = {0.11, -0.05};
  adamw_step(p, state, hp);
  for (int i = 0; i < 2; ++i) {
    // bias correction cancels on the first step: mhat = g, vhat = g^2
    const double expect = p0[i] * (1 - hp.lr * hp.weight_decay) -
                          hp.lr * gr[i] / (std::abs(gr[i]) + hp.eps);
    CHECK(std::abs(p.values()[i] - expect) <= 1e-12);
  }
}

TEST_CASE("lr schedule ramp, peak, and floor") {
  LrSchedule s{3e-3, 2000, 10000, 1e-4};
  CHECK(lr_at(s, 2000) == doctest::Approx(3e-3));
  CHECK(lr_at(s, 1000) == doctest::Approx(1.5e-3));
  CHECK(lr_at(s, 10000) == doctest::Approx(1e-4));
  CHECK(lr_at(s, 0) == 0.0);
  CHECK_THROWS_AS(lr_at(s, -1), Error);
  CHECK_THROWS_AS(lr_at(s, 10001), Error);
}

TEST_CASE("gradient clipping caps the global norm") {
  Rng rng(9);
  std::map<std::string, TensorT<float>> params;
  params.emplace("a", swan::testing::random_tensor_f({64}, rng));
  params.emplace("b", swan::testing::random_tensor_f({32}, rng));
  for (auto& [name, p] : params) {
    auto g = p.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(rng.normal() * 3);
  }
  const double before = clip_grad_norm(params, 1.0);
  CHECK(before > 1.0);
  double sq = 0;
  for (auto& [name, p] : params)
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  CHECK(std::sqrt(sq) <= 1.0 + 1e-6);
}

TEST_CASE("rng streams are deterministic") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(43);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ |= (c.next_u64() != d.next_u64());
  CHECK(differ);
}
