#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "swiattn/routing.hpp"

using namespace swiattn;
using namespace testutil;
namespace op = swiattn::ops;

TEST_SUITE_BEGIN("routing");

TEST_CASE("soft gate values for degenerate routers") {
  Rng rng(3);
  Tensor h = random_tensor({4, 6}, rng);

  Router zero = Router::init(6, 0.0);
  Tensor s0 = soft_gate(h, zero);
  for (int64_t i = 0; i < 4; ++i) CHECK(s0.at(i) == doctest::Approx(0.5).epsilon(1e-15));

  Router hi = Router::init(6, 10.0);
  Tensor sh = soft_gate(h, hi);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(sh.at(i) == doctest::Approx(0.9999546021312976).epsilon(1e-12));

  Router lo = Router::init(6, -10.0);
  Tensor sl = soft_gate(h, lo);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(sl.at(i) == doctest::Approx(4.5397868702434395e-05).epsilon(1e-12));
}

TEST_CASE("hard gate: forward thresholding and straight-through gradient") {
  auto ste_case = [](double target_soft, double want_forward) {
    const double logit_v = std::log(target_soft / (1.0 - target_soft));
    Tensor logit = Tensor::scalar(logit_v);
    logit.set_requires_grad(true);
    double forward;
    {
      Tape tape;
      Tensor soft = op::sigmoid(logit);
      Tensor hard = hard_gate(soft, 0.5);
      forward = hard.item();
      tape.backward(hard);
    }
    CHECK(forward == want_forward);
    // gradient through the hard gate equals the sigmoid derivative exactly
    CHECK(std::fabs(logit.grad()[0] - target_soft * (1.0 - target_soft)) < 1e-15);
  };
  ste_case(0.7, 1.0);
  ste_case(0.3, 0.0);

  // exact tie goes to the SWA branch (strict inequality)
  Tensor tie = Tensor::scalar(0.5);
  CHECK(hard_gate(tie, 0.5).item() == 0.0);
}

TEST_CASE("hard gate forward values are always exactly 0 or 1") {
  Rng rng(5);
  Tensor soft = Tensor::zeros({64});
  for (double& v : soft.vec()) v = rng.uniform();
  Tensor hard = hard_gate(soft, 0.5);
  for (int64_t i = 0; i < hard.numel(); ++i) {
    const double v = hard.at(i);
    CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("STE property holds through the tape at several operating points") {
  for (double s : {0.3, 0.5, 0.7}) {
    const double x = std::log(s / (1.0 - s));
    Tensor logit = Tensor::scalar(x);
    logit.set_requires_grad(true);
    {
      Tape tape;
      Tensor hard = hard_gate(op::sigmoid(logit), 0.5);
      tape.backward(hard);
    }
    const double analytic = s * (1.0 - s);
    CHECK(std::fabs(logit.grad()[0] - analytic) < 1e-12);
  }
}

TEST_CASE("mix_outputs selects rows bitwise") {
  Rng rng(7);
  Tensor of = random_tensor({3, 5}, rng);
  Tensor os = random_tensor({3, 5}, rng);

  Tensor ones = Tensor::full({3, 1}, 1.0);
  CHECK(max_abs_diff(mix_outputs(ones, of, os), of) == 0.0);

  Tensor zeros = Tensor::zeros({3, 1});
  CHECK(max_abs_diff(mix_outputs(zeros, of, os), os) == 0.0);

  Tensor mixed = Tensor::from({1, 0, 1}, {3, 1});
  Tensor out = mix_outputs(mixed, of, os);
  for (int64_t c = 0; c < 5; ++c) {
    CHECK(out.at(0, c) == of.at(0, c));
    CHECK(out.at(1, c) == os.at(1, c));
    CHECK(out.at(2, c) == of.at(2, c));
  }

  Tensor bad = Tensor::from({0.5, 0, 1}, {3, 1});
  CHECK_THROWS_AS(mix_outputs(bad, of, os), ContractError);
  CHECK_THROWS_AS(mix_outputs(mixed, of, random_tensor({3, 4}, rng)), ShapeError);
}

TEST_CASE("unselected branch never affects forward output and gets zero gradient") {
  Rng rng(11);
  Tensor of = random_tensor({4, 6}, rng);
  Tensor os = random_tensor({4, 6}, rng);
  Tensor gate = Tensor::from({1, 0, 0, 1}, {4, 1});

  Tensor base = mix_outputs(gate, of, os);

  // perturb every unselected row; forward must not move at all
  Tensor of2 = of.clone(), os2 = os.clone();
  for (int64_t c = 0; c < 6; ++c) {
    of2.data()[1 * 6 + c] += 3.0;  // rows 1,2 unselected in full
    of2.data()[2 * 6 + c] -= 1.5;
    os2.data()[0 * 6 + c] += 2.0;  // rows 0,3 unselected in swa
    os2.data()[3 * 6 + c] += 7.0;
  }
  Tensor pert = mix_outputs(gate, of2, os2);
  CHECK(max_abs_diff(base, pert) == 0.0);

  // backward: gradient lands only on the selected rows
  of.set_requires_grad(true);
  os.set_requires_grad(true);
  {
    Tape tape;
    Tensor out = mix_outputs(gate, of, os);
    tape.backward(op::sum(out));
  }
  for (int64_t r = 0; r < 4; ++r) {
    const bool full_sel = gate.at(r, 0) == 1.0;
    for (int64_t c = 0; c < 6; ++c) {
      CHECK(of.grad()[size_t(r * 6 + c)] == (full_sel ? 1.0 : 0.0));
      CHECK(os.grad()[size_t(r * 6 + c)] == (full_sel ? 0.0 : 1.0));
    }
  }
}

TEST_CASE("monotonicity: raising the bias never lowers a soft gate or flips 1 to 0") {
  Rng rng(13);
  Tensor h = random_tensor({8, 5}, rng);
  Router r = Router::init(5, 0.0);
  for (double& v : r.weight.vec()) v = rng.normal(0.0, 0.5);

  double prev_bias = -3.0;
  Tensor prev_soft, prev_hard;
  for (double b = -3.0; b <= 3.0; b += 0.25) {
    r.bias.data()[0] = b;
    Tensor soft = soft_gate(h, r);
    Tensor hard = hard_gate(soft, 0.5);
    if (prev_soft.defined()) {
      for (int64_t i = 0; i < 8; ++i) {
        CHECK(soft.at(i) >= prev_soft.at(i));
        if (prev_hard.at(i) == 1.0) CHECK(hard.at(i) == 1.0);
      }
    }
    prev_soft = soft;
    prev_hard = hard;
    prev_bias = b;
  }
  (void)prev_bias;
}

TEST_SUITE_END();
