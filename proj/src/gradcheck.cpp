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

#include "dffrec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dffrec/fusion.hpp"
#include "dffrec/model.hpp"
#include "dffrec/ops.hpp"

namespace dffrec {

using ad::Tensor;

GradCheckReport FiniteDifferenceCheck(const std::function<Tensor()>& loss,
                                      std::span<Tensor> inputs, float h,
                                      double tol) {
  if (!(h > 0.0F)) throw std::invalid_argument("gradcheck: h must be > 0");
  for (Tensor& t : inputs) t.zero_grad();
  loss().backward();
  std::vector<std::vector<float>> analytic;
  for (const Tensor& t : inputs) {
    analytic.emplace_back(t.grad().begin(), t.grad().end());
  }

  GradCheckReport report;
  ad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const float original = values[j];
      const float up = original + h;
      const float down = original - h;
      values[j] = up;
      const double f_up = loss().item();
      values[j] = down;
      const double f_down = loss().item();
      values[j] = original;
      // Use the perturbation actually representable in float32.
      const double numeric =
          (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = analytic[i][j];
      const double err = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.coordinates;
      if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = err;
        report.worst_input = i;
        report.worst_index = j;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

namespace {

struct Rand {
  std::mt19937_64 rng;
  explicit Rand(std::uint64_t seed) : rng(seed) {}

  std::size_t Dim(std::size_t lo = 1, std::size_t hi = 8) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  Tensor Leaf(ad::Shape shape, float lo = -1.0F, float hi = 1.0F) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(ad::NumElements(shape));
    for (float& x : v) x = dist(rng);
    return Tensor::FromData(std::move(shape), std::move(v), true);
  }
  Tensor Const(ad::Shape shape) {
    Tensor t = Leaf(std::move(shape));
    return Tensor::FromData(t.shape(), {t.data().begin(), t.data().end()});
  }
  // Rows whose standard deviation is at least 0.5, away from the
  // degenerate near-constant rows where normalization is ill-conditioned.
  Tensor WellSpreadRows(std::size_t m, std::size_t n) {
    for (;;) {
      Tensor t = Leaf({m, n}, -2.0F, 2.0F);
      bool ok = true;
      for (std::size_t i = 0; i < m && ok; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += t.at(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          var += (t.at(i, j) - mean) * (t.at(i, j) - mean);
        }
        ok = var / static_cast<double>(n) >= 0.25;
      }
      if (ok) return t;
    }
  }

  // Keeps every entry at least `margin` away from zero.
  Tensor AwayFromZero(ad::Shape shape, float margin) {
    Tensor t = Leaf(std::move(shape));
    for (float& x : t.mutable_data()) {
      if (std::abs(x) < margin) x = x < 0.0F ? x - 2 * margin : x + 2 * margin;
    }
    return t;
  }
};

// Weighted sum so every output coordinate gets a distinct upstream gradient.
Tensor Reduce(const Tensor& out, const Tensor& weights) {
  return ad::Sum(ad::Mul(out, weights));
}

using CaseBuilder =
    std::function<GradCheckReport(Rand&, float h, double tol)>;

GradCheckReport CheckUnary(Rand& r, float h, double tol,
                           Tensor (*op)(const Tensor&), bool avoid_zero) {
  const ad::Shape shape{r.Dim(), r.Dim()};
  Tensor x = avoid_zero ? r.AwayFromZero(shape, 0.05F) : r.Leaf(shape);
  const Tensor w = r.Const(shape);
  Tensor inputs[] = {x};
  return FiniteDifferenceCheck([&] { return Reduce(op(x), w); }, inputs, h, tol);
}

std::vector<std::pair<std::string, CaseBuilder>> OpCases() {
  std::vector<std::pair<std::string, CaseBuilder>> cases;
  cases.emplace_back("matmul", [](Rand& r, float h, double tol) {
    const std::size_t m = r.Dim(), k = r.Dim(), n = r.Dim();
    Tensor a = r.Leaf({m, k}), b = r.Leaf({k, n});
    const Tensor w = r.Const({m, n});
    Tensor in[] = {a, b};
    return FiniteDifferenceCheck([&] { return Reduce(ad::MatMul(a, b), w); },
                                 in, h, tol);
  });
  cases.emplace_back("matmul_nt", [](Rand& r, float h, double tol) {
    const std::size_t m = r.Dim(), k = r.Dim(), n = r.Dim();
    Tensor a = r.Leaf({m, k}), b = r.Leaf({n, k});
    const Tensor w = r.Const({m, n});
    Tensor in[] = {a, b};
    return FiniteDifferenceCheck([&] { return Reduce(ad::MatMulNT(a, b), w); },
                                 in, h, tol);
  });
  for (const char* name : {"add", "sub", "mul"}) {
    cases.emplace_back(name, [name = std::string(name)](Rand& r, float h,
                                                        double tol) {
      const std::size_t m = r.Dim(), n = r.Dim();
      // Cycle through the broadcast forms.
      const std::size_t form = r.Dim(0, 3);
      const ad::Shape bshape = form == 0   ? ad::Shape{m, n}
                               : form == 1 ? ad::Shape{1, n}
                               : form == 2 ? ad::Shape{m, 1}
                                           : ad::Shape{1, 1};
      Tensor a = r.Leaf({m, n}), b = r.Leaf(bshape);
      const Tensor w = r.Const({m, n});
      auto op = name == "add" ? ad::Add : name == "sub" ? ad::Sub : ad::Mul;
      Tensor in[] = {a, b};
      return FiniteDifferenceCheck([&] { return Reduce(op(a, b), w); }, in, h,
                                   tol);
    });
  }
  cases.emplace_back("scale", [](Rand& r, float h, double tol) {
    const ad::Shape shape{r.Dim(), r.Dim()};
    Tensor x = r.Leaf(shape);
    const Tensor w = r.Const(shape);
    Tensor in[] = {x};
    return FiniteDifferenceCheck([&] { return Reduce(ad::Scale(x, -1.7F), w); },
                                 in, h, tol);
  });
  cases.emplace_back("sigmoid", [](Rand& r, float h, double tol) {
    return CheckUnary(r, h, tol, ad::Sigmoid, false);
  });
  cases.emplace_back("relu", [](Rand& r, float h, double tol) {
    return CheckUnary(r, h, tol, ad::Relu, true);
  });
  cases.emplace_back("softmax", [](Rand& r, float h, double tol) {
    return CheckUnary(r, h, tol, ad::Softmax, false);
  });
  cases.emplace_back("layer_norm", [](Rand& r, float h, double tol) {
    const std::size_t m = r.Dim(), n = r.Dim(2, 8);
    Tensor x = r.WellSpreadRows(m, n);
    Tensor g = r.Leaf({1, n}), b = r.Leaf({1, n});
    const Tensor w = r.Const({m, n});
    Tensor in[] = {x, g, b};
    return FiniteDifferenceCheck(
        [&] { return Reduce(ad::LayerNorm(x, g, b), w); }, in, h, tol);
  });
  cases.emplace_back("concat", [](Rand& r, float h, double tol) {
    const int axis = static_cast<int>(r.Dim(0, 1));
    const std::size_t m = r.Dim(), n = r.Dim(), extra = r.Dim();
    Tensor a = r.Leaf({m, n});
    Tensor b = axis == 0 ? r.Leaf({extra, n}) : r.Leaf({m, extra});
    const Tensor w = axis == 0 ? r.Const({m + extra, n}) : r.Const({m, n + extra});
    Tensor in[] = {a, b};
    return FiniteDifferenceCheck(
        [&] {
          const Tensor parts[] = {a, b};
          return Reduce(ad::Concat(parts, axis), w);
        },
        in, h, tol);
  });
  cases.emplace_back("reshape", [](Rand& r, float h, double tol) {
    const std::size_t m = r.Dim(), n = r.Dim();
    Tensor x = r.Leaf({m, n});
    const Tensor w = r.Const({n, m});
    Tensor in[] = {x};
    return FiniteDifferenceCheck(
        [&] { return Reduce(ad::Reshape(x, {n, m}), w); }, in, h, tol);
  });
  cases.emplace_back("embedding", [](Rand& r, float h, double tol) {
    const std::size_t rows = r.Dim(), d = r.Dim(), count = r.Dim();
    Tensor table = r.Leaf({rows, d});
    std::vector<std::int64_t> ids(count);
    for (auto& id : ids) id = static_cast<std::int64_t>(r.Dim(0, rows - 1));
    const Tensor w = r.Const({count, d});
    Tensor in[] = {table};
    return FiniteDifferenceCheck(
        [&] { return Reduce(ad::Embedding(table, ids), w); }, in, h, tol);
  });
  cases.emplace_back("dropout", [](Rand& r, float h, double tol) {
    const ad::Shape shape{r.Dim(), r.Dim()};
    Tensor x = r.Leaf(shape);
    const Tensor w = r.Const(shape);
    const std::uint64_t seed = r.rng();
    Tensor in[] = {x};
    return FiniteDifferenceCheck(
        [&] {
          std::mt19937_64 mask_rng(seed);
          return Reduce(ad::Dropout(x, 0.3F, mask_rng), w);
        },
        in, h, tol);
  });
  cases.emplace_back("causal_attention", [](Rand& r, float h, double tol) {
    const std::size_t batch = r.Dim(1, 3), seq = r.Dim(1, 6);
    const std::size_t heads = r.Dim(1, 2), dh = r.Dim(1, 4);
    const std::size_t d = heads * dh;
    Tensor q = r.Leaf({batch * seq, d}), k = r.Leaf({batch * seq, d}),
           v = r.Leaf({batch * seq, d});
    std::vector<std::uint8_t> valid(batch * seq);
    for (std::size_t b = 0; b < batch; ++b) {
      // Left padding.
      const std::size_t pad = r.Dim(0, seq - 1);
      for (std::size_t t = 0; t < seq; ++t) valid[b * seq + t] = t >= pad;
    }
    const Tensor w = r.Const({batch * seq, d});
    Tensor in[] = {q, k, v};
    return FiniteDifferenceCheck(
        [&] {
          return Reduce(ad::CausalAttention(q, k, v, batch, seq, heads, valid), w);
        },
        in, h, tol);
  });
  cases.emplace_back("softmax_cross_entropy", [](Rand& r, float h, double tol) {
    const std::size_t rows = r.Dim(), cols = r.Dim(2, 8);
    Tensor logits = r.Leaf({rows, cols}, -2.0F, 2.0F);
    std::vector<std::int64_t> targets(rows);
    std::vector<std::uint8_t> mask(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      targets[i] = static_cast<std::int64_t>(r.Dim(0, cols - 1));
      mask[i] = i == 0 || r.Dim(0, 3) > 0;
    }
    Tensor in[] = {logits};
    return FiniteDifferenceCheck(
        [&] { return ad::SoftmaxCrossEntropy(logits, targets, mask); }, in, h,
        tol);
  });
  return cases;
}

GradCheckReport Worst(const GradCheckReport& a, const GradCheckReport& b) {
  GradCheckReport out = a.max_relative_error >= b.max_relative_error ? a : b;
  out.coordinates = a.coordinates + b.coordinates;
  out.passed = a.passed && b.passed;
  return out;
}

// Central differences need every ReLU input farther from zero than any
// perturbation can move it; draws closer than this are redrawn.
constexpr float kKinkMarginFactor = 10.0F;
constexpr int kMaxRedraws = 64;

bool ClearOfKinks(const std::function<Tensor()>& loss, float h) {
  ad::NoGradGuard no_grad;
  ad::ResetReluMargin();
  loss();
  return ad::ReluMargin() >= kKinkMarginFactor * h;
}

}  // namespace

GradCheckReport GateMlpCheck(std::uint64_t seed, float h, double tol) {
  std::mt19937_64 seeder(seed);
  for (int attempt = 0;; ++attempt) {
    Rand r(seeder());
    const std::size_t d = 4, rows = 3;
    ParameterSet params;
    FusionGate gate(Strategy::kFusion, GateShape::kVector, d, params, r.rng);
    Tensor e_id = r.Leaf({rows, d}), e_v = r.Leaf({rows, d});
    const Tensor w = r.Const({rows, d});
    std::vector<Tensor> inputs = {e_id, e_v};
    std::uniform_real_distribution<float> value(-0.6F, 0.6F);
    for (const auto& name : params.names()) {
      for (float& v : params.Get(name).mutable_data()) v = value(r.rng);
      inputs.push_back(params.Get(name));
    }
    const auto loss = [&] { return Reduce(gate.Fuse(e_id, e_v), w); };
    if (attempt + 1 < kMaxRedraws && !ClearOfKinks(loss, h)) continue;
    return FiniteDifferenceCheck(loss, inputs, h, tol);
  }
}

GradCheckReport FullModelCheck(std::uint64_t seed, float h, double tol) {
  std::mt19937_64 seeder(seed);
  for (int attempt = 0;; ++attempt) {
    Rand r(seeder());
    const std::size_t num_layers = 3, dim = 3;
    std::vector<ItemFeatures> items;
    for (std::uint64_t id = 1; id <= 4; ++id) {
      ItemFeatures f{id, {}};
      for (std::size_t i = 0; i < num_layers * dim; ++i) {
        f.values.push_back(std::uniform_real_distribution<float>(-1, 1)(r.rng));
      }
      items.push_back(std::move(f));
    }
    FeatureStoreHeader header;
    header.num_layers = num_layers;
    header.dim = dim;
    const FeatureStore store(header, std::move(items));
    const Catalog catalog = Catalog::FromStore(store);

    ModelConfig config;
    config.fusion.d = 4;
    config.backbone.d = 4;
    config.backbone.num_blocks = 1;
    config.backbone.num_heads = 2;
    config.backbone.max_seq_len = 3;
    Recommender model(config, catalog, &store, r.rng());
    // Random values everywhere, biases and layer logits included, so no
    // gradient path is hidden behind a zero initialization. The ID table's
    // padding row stays zero.
    std::uniform_real_distribution<float> value(-0.6F, 0.6F);
    for (const auto& name : model.params().names()) {
      auto values = model.params().Get(name).mutable_data();
      const std::size_t skip = name == ItemEncoder::kIdTable ? config.fusion.d : 0;
      for (std::size_t i = skip; i < values.size(); ++i) values[i] = value(r.rng);
    }

    const std::vector<std::int64_t> user_a = {1, 3, 2, 4};
    const std::vector<std::int64_t> user_b = {2, 4};
    const SequenceBatch batch = MakeTrainingBatch({&user_a, &user_b}, 3);
    std::vector<Tensor> inputs;
    for (const auto& name : model.params().names()) {
      inputs.push_back(model.params().Get(name));
    }
    const auto loss = [&] { return model.TrainingLoss(batch, nullptr); };
    if (attempt + 1 < kMaxRedraws && !ClearOfKinks(loss, h)) continue;
    return FiniteDifferenceCheck(loss, inputs, h, tol);
  }
}

std::vector<GradCheckCase> RunGradCheckSuite(int seeds, float h, double tol) {
  std::vector<GradCheckCase> out;
  const auto sweep = [&](const std::string& name, int count, auto&& check) {
    GradCheckReport agg;
    for (int s = 0; s < count; ++s) {
      const GradCheckReport r = check(static_cast<std::uint64_t>(s));
      agg = s == 0 ? r : Worst(agg, r);
    }
    out.push_back({name, agg});
  };
  for (auto& [name, build] : OpCases()) {
    sweep(name, seeds, [&](std::uint64_t s) {
      Rand r(s * 7919 + 17);
      return build(r, h, tol);
    });
  }
  sweep("gate_mlp", seeds,
        [&](std::uint64_t s) { return GateMlpCheck(s + 101, h, tol); });
  sweep("dff_backbone_toy", std::max(1, std::min(seeds, 20)),
        [&](std::uint64_t s) { return FullModelCheck(s + 1001, h, tol); });
  return out;
}

}  // namespace dffrec
