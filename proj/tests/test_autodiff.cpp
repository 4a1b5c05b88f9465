/*
 * Copyright 2026 The DFFRec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dffrec/error.hpp"
#include "dffrec/gradcheck.hpp"
#include "dffrec/ops.hpp"
#include "dffrec/optim.hpp"
#include "dffrec/parameters.hpp"
#include "dffrec/tensor.hpp"
#include "test_util.hpp"

namespace ad = dffrec::ad;
using ad::Tensor;

namespace {

Tensor RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                    bool grad = true) {
  std::normal_distribution<float> dist(0.0F, 1.0F);
  std::vector<float> v(r * c);
  for (float& x : v) x = dist(rng);
  return Tensor::FromData({r, c}, v, grad);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("data length equals product of shape") {
    const Tensor t = Tensor::Zeros({3, 4});
    CHECK(t.numel() == 12);
    CHECK_THROWS_AS(Tensor::FromData({2, 2}, {1.0F, 2.0F}), std::invalid_argument);
  }

  TEST_CASE("grad matches data shape") {
    Tensor x = Tensor::Full({2, 3}, 1.5F, true);
    Tensor loss = ad::Sum(ad::Mul(x, x));
    loss.backward();
    CHECK(x.grad().size() == x.numel());
  }

  TEST_CASE("sigmoid of zero is one half") {
    CHECK(ad::Sigmoid(Tensor::Scalar(0.0F)).item() == doctest::Approx(0.5));
  }

  TEST_CASE("softmax of equal logits is uniform") {
    const Tensor s = ad::Softmax(Tensor::FromData({1, 3}, {0, 0, 0}));
    for (float v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("ones matmul gives inner dimension") {
    const Tensor c = ad::MatMul(Tensor::Full({2, 3}, 1.0F), Tensor::Full({3, 2}, 1.0F));
    CHECK(c.shape() == ad::Shape{2, 2});
    for (float v : c.data()) CHECK(v == 3.0F);
  }

  TEST_CASE("shape mismatch names the op and both shapes") {
    try {
      ad::MatMul(Tensor::Zeros({2, 3}), Tensor::Zeros({2, 3}));
      FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      CHECK(msg.find("matmul") != std::string::npos);
      CHECK(msg.find("(2, 3)") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::Add(Tensor::Zeros({2, 3}), Tensor::Zeros({3, 2})),
                    std::invalid_argument);
  }

  TEST_CASE("non-finite output is an error") {
    const Tensor big = Tensor::Full({1, 1}, 3e38F);
    CHECK_THROWS_AS(ad::Scale(big, 10.0F), dffrec::NumericalError);
  }

  TEST_CASE("sum backward gives ones") {
    Tensor x = Tensor::FromData({3}, {1, 2, 3}, true);
    ad::Sum(x).backward();
    for (float g : x.grad()) CHECK(g == 1.0F);
  }

  TEST_CASE("sigmoid backward at zero is a quarter") {
    Tensor x = Tensor::Scalar(0.0F, true);
    ad::Sigmoid(x).backward();
    CHECK(x.grad()[0] == doctest::Approx(0.25));
  }

  TEST_CASE("constant loss gives zero gradient") {
    Tensor x = Tensor::FromData({2}, {4, 5}, true);
    const Tensor loss = ad::Add(ad::Scale(ad::Sum(x), 0.0F), Tensor::Scalar(7.0F));
    loss.backward();
    CHECK(loss.item() == 7.0F);
    for (float g : x.grad()) CHECK(g == 0.0F);
  }

  TEST_CASE("backward on a non-scalar is an error") {
    Tensor x = Tensor::Zeros({2, 2}, true);
    CHECK_THROWS_AS(ad::Scale(x, 2.0F).backward(), std::invalid_argument);
  }

  TEST_CASE("repeated backward overwrites rather than accumulates") {
    Tensor x = Tensor::FromData({1, 2}, {1, 2}, true);
    const Tensor loss = ad::Sum(ad::Mul(x, x));
    loss.backward();
    const std::vector<float> first(x.grad().begin(), x.grad().end());
    loss.backward();
    const std::vector<float> second(x.grad().begin(), x.grad().end());
    CHECK(first == second);
    CHECK(first[1] == 4.0F);
  }

  TEST_CASE("backward is bit-deterministic") {
    std::mt19937_64 rng(5);
    Tensor a = RandomMatrix(4, 6, rng);
    Tensor b = RandomMatrix(6, 3, rng);
    const Tensor w = Tensor::FromData({4, 3}, std::vector<float>(12, 0.3F));
    const Tensor l2 = ad::Sum(ad::Mul(ad::Softmax(ad::MatMul(a, b)), w));
    l2.backward();
    const std::vector<float> g1(a.grad().begin(), a.grad().end());
    l2.backward();
    const std::vector<float> g2(a.grad().begin(), a.grad().end());
    CHECK(g1 == g2);
  }

  TEST_CASE("softmax rows are non-negative and sum to one") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor s = ad::Softmax(ad::Scale(RandomMatrix(3, 7, rng, false), 5.0F));
      for (std::size_t r = 0; r < 3; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
          CHECK(s.at(r, c) >= 0.0F);
          total += s.at(r, c);
        }
        CHECK(std::abs(total - 1.0) <= 1e-6);
      }
    }
  }

  TEST_CASE("no-grad guard records nothing") {
    Tensor x = Tensor::Full({2, 2}, 1.0F, true);
    {
      ad::NoGradGuard guard;
      CHECK_FALSE(ad::GradEnabled());
      CHECK_FALSE(ad::Scale(x, 2.0F).requires_grad());
    }
    CHECK(ad::GradEnabled());
  }

  TEST_CASE("single-key attention returns the value row") {
    const Tensor q = Tensor::FromData({1, 2}, {0.3F, -0.7F});
    const Tensor k = Tensor::FromData({1, 2}, {1.1F, 0.2F});
    const Tensor v = Tensor::FromData({1, 2}, {4.0F, -2.0F});
    const std::vector<std::uint8_t> valid = {1};
    const Tensor out = ad::CausalAttention(q, k, v, 1, 1, 1, valid);
    CHECK(out.at(0, 0) == doctest::Approx(4.0F));
    CHECK(out.at(0, 1) == doctest::Approx(-2.0F));
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("x squared at 3 has gradient 6") {
    Tensor x = Tensor::Scalar(3.0F, true);
    std::vector<Tensor> inputs = {x};
    const auto report = dffrec::FiniteDifferenceCheck(
        [&] { return ad::Mul(x, x); }, inputs, 1e-4F, 1e-6);
    CHECK(report.worst_analytic == doctest::Approx(6.0));
    CHECK(report.worst_numeric == doctest::Approx(6.0).epsilon(1e-3));
    // A two-point difference of x^2 is exact up to float rounding of x +- h.
    CHECK(report.max_relative_error < 1e-3);
  }

  TEST_CASE("detects a wrong gradient") {
    Tensor x = Tensor::FromData({1, 3}, {0.5F, -1.0F, 2.0F}, true);
    std::vector<Tensor> inputs = {x};
    // Scale backward doubles the gradient; the loss value is then rebuilt
    // from a graph that ignores that scale.
    const auto report = dffrec::FiniteDifferenceCheck(
        [&] {
          Tensor loss = ad::Sum(ad::Mul(x, x));
          if (ad::GradEnabled()) loss = ad::Scale(loss, 2.0F);
          return loss;
        },
        inputs, 1e-3F, 1e-3);
    CHECK_FALSE(report.passed);
  }

  TEST_CASE("gate MLP subgraph at tol 1e-4") {
    const auto report = dffrec::GateMlpCheck(1, 1e-3F, 1e-4);
    CHECK(report.passed);
    CHECK(report.coordinates > 0);
  }

  TEST_CASE("full toy model at tol 1e-3") {
    const auto report = dffrec::FullModelCheck(1, 1e-3F, 1e-3);
    CHECK(report.passed);
  }

  TEST_CASE("every op passes over 100 seeds") {
    const auto cases = dffrec::RunGradCheckSuite(100, 1e-3F, 1e-3);
    CHECK(cases.size() >= 15);
    for (const auto& c : cases) {
      INFO(c.name << " max err " << c.report.max_relative_error);
      CHECK(c.report.passed);
    }
  }
}

TEST_SUITE("adamw") {
  namespace {
  float OneStep(float value, float lr, float wd) {
    dffrec::ParameterSet params;
    params.Add("p", Tensor::Full({1}, value, true));
    dffrec::AdamWOptions options;
    options.learning_rate = lr;
    options.weight_decay = wd;
    dffrec::AdamW opt(params, options);
    params.ZeroGrad();
    opt.Step();
    return params.Get("p").data()[0];
  }
  }  // namespace

  TEST_CASE("zero gradient applies only decoupled decay") {
    CHECK(OneStep(1.0F, 1e-3F, 0.1F) == 1.0F * (1.0F - 1e-3F * 0.1F));
    CHECK(OneStep(1.0F, 1e-3F, 0.1F) == doctest::Approx(0.9999).epsilon(1e-7));
    CHECK(OneStep(1.0F, 1e-4F, 0.1F) == 1.0F * (1.0F - 1e-4F * 0.1F));
  }

  TEST_CASE("zero gradient and zero decay is the identity") {
    CHECK(OneStep(1.0F, 1e-3F, 0.0F) == 1.0F);
    CHECK(OneStep(-3.25F, 0.5F, 0.0F) == -3.25F);
  }

  TEST_CASE("identical states give identical updates") {
    std::vector<float> a = {0.5F, -1.0F}, b = a;
    const std::vector<float> g = {0.1F, -0.2F};
    dffrec::MomentBuffers ma{{0, 0}, {0, 0}}, mb = ma;
    dffrec::AdamWOptions options;
    for (int step = 1; step <= 3; ++step) {
      dffrec::AdamWUpdate(a, g, ma, options, step, 1.0F, "a");
      dffrec::AdamWUpdate(b, g, mb, options, step, 1.0F, "b");
    }
    CHECK(a == b);
  }

  TEST_CASE("non-finite gradient names the parameter") {
    std::vector<float> p = {1.0F};
    const std::vector<float> g = {NAN};
    dffrec::MomentBuffers m{{0}, {0}};
    try {
      dffrec::AdamWUpdate(p, g, m, {}, 1, 1.0F, "proj.weight");
      FAIL("expected a throw");
    } catch (const dffrec::NumericalError& e) {
      CHECK(std::string(e.what()).find("proj.weight") != std::string::npos);
    }
  }

  TEST_CASE("step count and moment shapes") {
    dffrec::ParameterSet params;
    params.Add("w", Tensor::Full({2, 3}, 1.0F, true));
    dffrec::AdamW opt(params, {});
    for (int i = 1; i <= 4; ++i) {
      opt.Step();
      CHECK(opt.step_count() == i);
    }
    CHECK(opt.moments("w").first.size() == 6);
    CHECK(opt.moments("w").second.size() == 6);
  }

  TEST_CASE("checkpoint round trip") {
    dffrec::testing::TempDir dir;
    dffrec::ParameterSet a;
    a.Add("w", Tensor::FromData({2}, {1.5F, -2.0F}, true));
    a.Save(dir / "c.dffc", "meta");
    dffrec::ParameterSet b;
    b.Add("w", Tensor::Zeros({2}, true));
    CHECK(b.Load(dir / "c.dffc") == "meta");
    CHECK(b.Get("w").data()[1] == -2.0F);
    dffrec::ParameterSet c;
    c.Add("w", Tensor::Zeros({3}, true));
    CHECK_THROWS(c.Load(dir / "c.dffc"));
  }
}
