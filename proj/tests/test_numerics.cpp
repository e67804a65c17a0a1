#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "swiattn/ops.hpp"

using namespace swiattn;
using namespace testutil;
namespace op = swiattn::ops;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("tensor basics and invariants") {
  Tensor t = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor::from({1, 2}, {3}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({std::nan("")}, {1}), NumericsError);
  CHECK_THROWS_AS(t.item(), ContractError);

  Tensor c = t.clone();
  c.data()[0] = 99;
  CHECK(t.at(0, 0) == 1.0);
}

TEST_CASE("matmul identity and hand cases") {
  Tensor eye = Tensor::from({1, 0, 0, 1}, {2, 2});
  Tensor m = Tensor::from({1, 2, 3, 4}, {2, 2});
  Tensor out = op::matmul(eye, m);
  CHECK(max_abs_diff(out, m) == 0.0);

  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({3, 4}, {2, 1});
  CHECK(op::matmul(a, b).item() == doctest::Approx(11.0));

  CHECK_THROWS_AS(op::matmul(a, a), ShapeError);
}

TEST_CASE("matmul gradient vs finite differences") {
  Rng rng(7);
  Tensor a = random_tensor({5, 7}, rng);
  Tensor b = random_tensor({7, 3}, rng);
  double err = check_gradients({a, b}, [&] { return op::sum(op::matmul(a, b)); });
  CHECK(err < 1e-6);
}

TEST_CASE("sigmoid values and antisymmetry") {
  Tensor x = Tensor::from({0.0, 2.0}, {2});
  Tensor y = op::sigmoid(x);
  CHECK(y.at(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.at(1) == doctest::Approx(0.8807970779778824).epsilon(1e-14));

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    double v = rng.uniform(-30, 30);
    Tensor p = op::sigmoid(Tensor::scalar(v));
    Tensor n = op::sigmoid(Tensor::scalar(-v));
    CHECK(p.item() + n.item() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid and softplus are stable over huge inputs") {
  Tensor wide = Tensor::from({-1e6, -700.0, -50.0, 0.0, 50.0, 700.0, 1e6}, {7});
  CHECK_NOTHROW(op::sigmoid(wide));
  CHECK_NOTHROW(op::softplus(wide));
  Tensor sp = op::softplus(wide);
  for (int64_t i = 0; i < sp.numel(); ++i) CHECK(sp.at(i) >= 0.0);
}

TEST_CASE("softplus values") {
  Tensor x = Tensor::from({0.0, 50.0, -50.0}, {3});
  Tensor y = op::softplus(x);
  CHECK(y.at(0) == doctest::Approx(0.6931471805599453).epsilon(1e-14));
  CHECK(y.at(1) == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(y.at(2) == doctest::Approx(1.928749847994236e-22).epsilon(1e-10));
  CHECK(y.at(2) > 0.0);
}

TEST_CASE("softplus identity sp(x) - sp(-x) = x") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    double v = rng.uniform(-40, 40);
    double d = op::softplus(Tensor::scalar(v)).item() - op::softplus(Tensor::scalar(-v)).item();
    CHECK(std::fabs(d - v) < 1e-9);
  }
}

TEST_CASE("softmax rows: values, masking, degenerate rows") {
  Tensor u = Tensor::from({0, 0, 0}, {1, 3});
  Tensor yu = op::softmax_rows(u);
  for (int j = 0; j < 3; ++j) CHECK(yu.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  std::vector<uint8_t> mask = {1, 0};
  Tensor two = Tensor::from({1, 1}, {1, 2});
  Tensor ym = op::softmax_rows(two, &mask);
  CHECK(ym.at(0, 0) == 1.0);
  CHECK(ym.at(0, 1) == 0.0);

  Tensor v = Tensor::from({1, 2, 3}, {1, 3});
  Tensor yv = op::softmax_rows(v);
  CHECK(yv.at(0, 0) == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(yv.at(0, 1) == doctest::Approx(0.24472847105479767).epsilon(1e-12));
  CHECK(yv.at(0, 2) == doctest::Approx(0.6652409557748219).epsilon(1e-12));

  std::vector<uint8_t> dead = {0, 0, 0};
  CHECK_THROWS_AS(op::softmax_rows(v, &dead), ContractError);
}

TEST_CASE("softmax rows sum to one within 1e-12, masked entries exactly zero") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({4, 9}, rng, 5.0);
    std::vector<uint8_t> mask(size_t(x.numel()));
    for (auto& m : mask) m = rng.uniform() < 0.6 ? 1 : 0;
    for (int64_t r = 0; r < 4; ++r) mask[size_t(r * 9 + (trial % 9))] = 1;  // keep rows alive
    Tensor y = op::softmax_rows(x, &mask);
    for (int64_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int64_t j = 0; j < 9; ++j) {
        if (!mask[size_t(r * 9 + j)]) CHECK(y.at(r, j) == 0.0);
        s += y.at(r, j);
      }
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("rms_norm values") {
  Tensor ones = Tensor::from({1, 1, 1, 1}, {1, 4});
  Tensor sc = Tensor::full({4}, 1.0);
  Tensor y = op::rms_norm(ones, sc);
  for (int j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(1.0).epsilon(1e-6));

  Tensor twos = Tensor::from({2, 2}, {1, 2});
  Tensor sc2 = Tensor::full({2}, 1.0);
  Tensor y2 = op::rms_norm(twos, sc2);
  for (int j = 0; j < 2; ++j) CHECK(y2.at(0, j) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rms_norm gradient vs finite differences") {
  Rng rng(19);
  Tensor x = random_tensor({3, 8}, rng);
  Tensor sc = random_tensor({8}, rng);
  double err = check_gradients({x, sc}, [&] {
    Tensor y = op::rms_norm(x, sc);
    return op::sum(op::mul(y, y));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("backward basics: ones, quadratic, accumulation, contract errors") {
  Rng rng(23);
  Tensor x = random_tensor({2, 3}, rng);
  x.set_requires_grad(true);

  {
    Tape tape;
    Tensor s = op::sum(x);
    tape.backward(s);
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
  x.zero_grad();

  {
    Tape tape;
    Tensor s = op::sum(op::mul(x, x));
    tape.backward(s);
  }
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[size_t(i)] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-12));

  // repeated backward without reset accumulates
  x.zero_grad();
  {
    Tape tape;
    Tensor s = op::sum(x);
    tape.backward(s);
    tape.backward(s);
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));

  {
    Tape tape;
    Tensor y = op::mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), ContractError);
  }
}

TEST_CASE("composite sigmoid(matmul) gradient vs finite differences") {
  Rng rng(29);
  Tensor a = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({6, 2}, rng);
  double err = check_gradients({a, b}, [&] {
    return op::sum(op::sigmoid(op::matmul(a, b)));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("per-op gradient checks on random shapes") {
  Rng rng(31);
  auto run = [&](const char* name, std::vector<Tensor> leaves,
                 std::function<Tensor()> build) {
    INFO(name);
    CHECK(check_gradients(std::move(leaves), build) < 1e-5);
  };

  Tensor a = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3, 5}, rng);
  run("add", {a, b}, [&] { return op::sum(op::mul(op::add(a, b), a)); });
  run("sub", {a, b}, [&] { return op::sum(op::mul(op::sub(a, b), b)); });
  run("mul", {a, b}, [&] { return op::sum(op::mul(a, b)); });
  run("scale", {a}, [&] { return op::sum(op::scale(a, -2.5)); });

  Tensor bias = random_tensor({5}, rng);
  run("add_bias", {a, bias}, [&] { return op::sum(op::sigmoid(op::add_bias(a, bias))); });

  Tensor c = random_tensor({5, 4}, rng);
  run("matmul_nt", {a, a}, [&] { return op::sum(op::matmul_nt(a, a)); });
  run("transpose", {c}, [&] { return op::sum(op::sigmoid(op::matmul(a, c))); });
  run("slice+concat", {c}, [&] {
    Tensor left = op::slice_cols(c, 0, 2);
    Tensor right = op::slice_cols(c, 2, 4);
    return op::sum(op::mul(op::concat_cols({right, left}), op::concat_cols({right, left})));
  });

  Tensor sm = random_tensor({2, 6}, rng);
  run("softmax_rows", {sm}, [&] {
    Tensor y = op::softmax_rows(sm);
    return op::sum(op::mul(y, sm));
  });

  Tensor sx = random_tensor({2, 4}, rng);
  run("silu", {sx}, [&] { return op::sum(op::silu(sx)); });
  run("softplus", {sx}, [&] { return op::sum(op::softplus(sx)); });
  run("mean", {sx}, [&] { return op::mean(op::mul(sx, sx)); });

  Tensor rx = random_tensor({3, 8}, rng);
  std::vector<int64_t> pos = {0, 5, 11};
  run("apply_rope", {rx}, [&] {
    Tensor y = op::apply_rope(rx, pos, 4);
    return op::sum(op::mul(y, y));
  });

  Tensor table = random_tensor({7, 3}, rng);
  TokenSeq ids = {2, 0, 6, 2};
  run("embedding_rows", {table}, [&] {
    return op::sum(op::sigmoid(op::embedding_rows(table, ids)));
  });

  Tensor logits = random_tensor({4, 5}, rng, 2.0);
  TokenSeq toks = {1, 4, 0, 3};
  run("lm_loss", {logits}, [&] { return op::lm_loss(logits, toks).loss; });
}

TEST_CASE("apply_rope: zero position identity, norm preservation, closed form") {
  Rng rng(37);
  Tensor x = random_tensor({1, 8}, rng);
  Tensor y0 = op::apply_rope(x, {0}, 8);
  CHECK(max_abs_diff(x, y0) == 0.0);

  Tensor x2 = random_tensor({4, 8}, rng);
  Tensor y2 = op::apply_rope(x2, {3, 9, 100, 1}, 4);
  for (int64_t r = 0; r < 4; ++r) {
    for (int64_t h = 0; h < 2; ++h) {
      double n0 = 0, n1 = 0;
      for (int64_t j = 0; j < 4; ++j) {
        n0 += x2.at(r, h * 4 + j) * x2.at(r, h * 4 + j);
        n1 += y2.at(r, h * 4 + j) * y2.at(r, h * 4 + j);
      }
      CHECK(std::fabs(std::sqrt(n0) - std::sqrt(n1)) < 1e-12);
    }
  }

  Tensor probe = Tensor::from({1, 0, 1, 0}, {1, 4});
  Tensor rot = op::apply_rope(probe, {1}, 4);
  CHECK(rot.at(0, 0) == doctest::Approx(std::cos(1.0)).epsilon(1e-14));
  CHECK(rot.at(0, 1) == doctest::Approx(std::sin(1.0)).epsilon(1e-14));
  CHECK(rot.at(0, 2) == doctest::Approx(std::cos(0.01)).epsilon(1e-14));
  CHECK(rot.at(0, 3) == doctest::Approx(std::sin(0.01)).epsilon(1e-14));

  CHECK_THROWS_AS(op::apply_rope(probe, {1}, 3), ConfigError);
}

TEST_CASE("lm_loss: uniform, confident, oracle, errors") {
  Tensor uni = Tensor::zeros({3, 4});
  TokenSeq toks = {0, 1, 2};
  auto r = op::lm_loss(uni, toks);
  CHECK(r.loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(r.nll[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(r.nll[2] == doctest::Approx(std::log(4.0)).epsilon(1e-14));  // mean slot

  Tensor conf = Tensor::zeros({2, 4});
  conf.data()[1] = 100.0;  // position 0 strongly predicts token 1
  auto rc = op::lm_loss(conf, {3, 1});
  CHECK(rc.loss.item() < 1e-12);

  Rng rng(41);
  Tensor lg = random_tensor({3, 5}, rng, 2.0);
  TokenSeq t2 = {4, 2, 0};
  auto rr = op::lm_loss(lg, t2);
  double want = 0.0;
  for (int64_t row = 0; row < 2; ++row) {
    double z = 0.0;
    for (int64_t j = 0; j < 5; ++j) z += std::exp(lg.at(row, j));
    want += std::log(z) - lg.at(row, t2[size_t(row + 1)]);
  }
  CHECK(rr.loss.item() == doctest::Approx(want / 2.0).epsilon(1e-12));

  CHECK_THROWS_AS(op::lm_loss(lg, TokenSeq{9, 0, 1}), ContractError);
}

TEST_CASE("finite outputs are enforced") {
  Tensor big = Tensor::full({2, 2}, 1e200);
  CHECK_THROWS_AS(op::matmul(big, big), NumericsError);
}

TEST_SUITE_END();
