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

#include "dffrec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dffrec/error.hpp"

namespace dffrec::ad {
namespace {

[[noreturn]] void ShapeError(const std::string& op, const Tensor& a,
                             const Tensor& b) {
  throw std::invalid_argument(op + ": shape mismatch " +
                              ShapeToString(a.shape()) + " vs " +
                              ShapeToString(b.shape()));
}

void RequireMatrix(const std::string& op, const Tensor& t) {
  if (t.rank() != 2) {
    throw std::invalid_argument(op + ": expected a matrix, got shape " +
                                ShapeToString(t.shape()));
  }
}

// Builds the output node. Gradient tracking is on iff grad mode is enabled
// and some input tracks gradients.
std::shared_ptr<Node> MakeNode(const char* op, Shape shape,
                               std::vector<float> value,
                               std::initializer_list<Tensor> inputs) {
  for (float v : value) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string(op) + ": non-finite output of shape " +
                           ShapeToString(shape));
    }
  }
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (GradEnabled()) {
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    node->grad.assign(node->value.size(), 0.0F);
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
  }
  return node;
}

// C (m x n) [+]= A (m x k) . B (k x n). The inner loop runs over
// independent output columns so it vectorizes without reassociation.
void GemmNN(const float* a, const float* b, float* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0F);
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      if (av == 0.0F) continue;
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m x n) [+]= A (m x k) . B(n x k)^T
void GemmNT(const float* a, const float* b, float* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  std::vector<float> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  GemmNN(a, bt.data(), c, m, k, n, accumulate);
}

// C (m x n) += A(k x m)^T . B (k x n)
void GemmTNAccumulate(const float* a, const float* b, float* c, std::size_t k,
                      std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const float* arow = a + p * m;
    const float* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0F) continue;
      float* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

enum class Broadcast { kFull, kRow, kCol, kScalar };

Broadcast ResolveBroadcast(const std::string& op, const Tensor& a,
                           const Tensor& b) {
  if (b.shape() == a.shape()) return Broadcast::kFull;
  if (b.numel() == 1) return Broadcast::kScalar;
  if (b.cols() == a.cols() && b.rows() == 1) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows() && b.rank() == a.rank()) {
    return Broadcast::kCol;
  }
  ShapeError(op, a, b);
}

inline std::size_t BIndex(Broadcast mode, std::size_t r, std::size_t c,
                          std::size_t cols) {
  switch (mode) {
    case Broadcast::kFull:
      return r * cols + c;
    case Broadcast::kRow:
      return c;
    case Broadcast::kCol:
      return r;
    case Broadcast::kScalar:
      break;
  }
  return 0;
}

enum class Binary { kAdd, kSub, kMul };

Tensor Elementwise(const char* op, Binary kind, const Tensor& a,
                   const Tensor& b) {
  const Broadcast mode = ResolveBroadcast(op, a, b);
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<float> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const float x = av[r * cols + c];
      const float y = bv[BIndex(mode, r, c, cols)];
      float z = 0.0F;
      switch (kind) {
        case Binary::kAdd: z = x + y; break;
        case Binary::kSub: z = x - y; break;
        case Binary::kMul: z = x * y; break;
      }
      out[r * cols + c] = z;
    }
  }
  auto node = MakeNode(op, a.shape(), std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [mode, kind, rows, cols](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t ia = r * cols + c;
          const std::size_t ib = BIndex(mode, r, c, cols);
          const float g = self.grad[ia];
          float ga = g;
          float gb = g;
          if (kind == Binary::kSub) gb = -g;
          if (kind == Binary::kMul) {
            ga = g * nb.value[ib];
            gb = g * na.value[ia];
          }
          if (na.requires_grad) na.grad[ia] += ga;
          if (nb.requires_grad) nb.grad[ib] += gb;
        }
      }
    };
  }
  return Tensor(node);
}

template <typename Forward, typename Derivative>
Tensor Unary(const char* op, const Tensor& x, Forward f, Derivative df) {
  std::vector<float> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto node = MakeNode(op, x.shape(), std::move(out), {x});
  if (node->requires_grad) {
    // df receives (input, output).
    node->backward_fn = [df](Node& self) {
      Node& in = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        in.grad[i] += self.grad[i] * df(in.value[i], self.value[i]);
      }
    };
  }
  return Tensor(node);
}

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireMatrix("matmul", a);
  RequireMatrix("matmul", b);
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) ShapeError("matmul", a, b);
  std::vector<float> out(m * n);
  GemmNN(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  auto node = MakeNode("matmul", {m, n}, std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [m, k, n](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      // dA = dC . B^T, dB = A^T . dC
      if (na.requires_grad) {
        GemmNT(self.grad.data(), nb.value.data(), na.grad.data(), m, n, k,
               true);
      }
      if (nb.requires_grad) {
        GemmTNAccumulate(na.value.data(), self.grad.data(), nb.grad.data(), m,
                         k, n);
      }
    };
  }
  return Tensor(node);
}

Tensor MatMulNT(const Tensor& a, const Tensor& b) {
  RequireMatrix("matmul_nt", a);
  RequireMatrix("matmul_nt", b);
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[0];
  if (b.shape()[1] != k) ShapeError("matmul_nt", a, b);
  std::vector<float> out(m * n);
  GemmNT(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  auto node = MakeNode("matmul_nt", {m, n}, std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [m, k, n](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      // dA = dC . B, dB = dC^T . A
      if (na.requires_grad) {
        GemmNN(self.grad.data(), nb.value.data(), na.grad.data(), m, n, k,
               true);
      }
      if (nb.requires_grad) {
        GemmTNAccumulate(self.grad.data(), na.value.data(), nb.grad.data(), m,
                         n, k);
      }
    };
  }
  return Tensor(node);
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return Elementwise("add", Binary::kAdd, a, b);
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Elementwise("sub", Binary::kSub, a, b);
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Elementwise("mul", Binary::kMul, a, b);
}

Tensor Scale(const Tensor& a, float factor) {
  return Unary(
      "scale", a, [factor](float x) { return x * factor; },
      [factor](float, float) { return factor; });
}

Tensor Sigmoid(const Tensor& x) {
  return Unary(
      "sigmoid", x,
      [](float v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0F) return 1.0F / (1.0F + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0F + e);
      },
      [](float, float y) { return y * (1.0F - y); });
}

namespace {
thread_local float relu_margin = std::numeric_limits<float>::infinity();
}  // namespace

void ResetReluMargin() {
  relu_margin = std::numeric_limits<float>::infinity();
}
float ReluMargin() { return relu_margin; }

Tensor Relu(const Tensor& x) {
  for (const float v : x.data()) relu_margin = std::min(relu_margin, std::abs(v));
  return Unary(
      "relu", x, [](float v) { return v > 0.0F ? v : 0.0F; },
      [](float v, float) { return v > 0.0F ? 1.0F : 0.0F; });
}

Tensor Softmax(const Tensor& x) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const auto xv = x.data();
  std::vector<float> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * cols;
    float* y = out.data() + r * cols;
    const float mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(double(in[c]) - mx);
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = static_cast<float>(std::exp(double(in[c]) - mx) / total);
    }
  }
  auto node = MakeNode("softmax", x.shape(), std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [rows, cols](Node& self) {
      Node& in = *self.inputs[0];
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = self.value.data() + r * cols;
        const float* gy = self.grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += double(gy[c]) * y[c];
        for (std::size_t c = 0; c < cols; ++c) {
          in.grad[r * cols + c] += static_cast<float>(y[c] * (gy[c] - dot));
        }
      }
    };
  }
  return Tensor(node);
}

Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 float eps) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (gamma.numel() != cols) ShapeError("layer_norm", x, gamma);
  if (beta.numel() != cols) ShapeError("layer_norm", x, beta);
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<float> out(x.numel());
  std::vector<float> normalized(x.numel());
  std::vector<float> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += in[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = in[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<float>(istd);
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (in[c] - mean) * istd;
      normalized[r * cols + c] = static_cast<float>(xhat);
      out[r * cols + c] = static_cast<float>(xhat * gv[c] + bv[c]);
    }
  }
  auto node = MakeNode("layer_norm", x.shape(), std::move(out),
                       {x, gamma, beta});
  if (node->requires_grad) {
    node->backward_fn = [rows, cols, normalized = std::move(normalized),
                         inv_std = std::move(inv_std)](Node& self) {
      Node& nx = *self.inputs[0];
      Node& ng = *self.inputs[1];
      Node& nbeta = *self.inputs[2];
      for (std::size_t r = 0; r < rows; ++r) {
        const float* gy = self.grad.data() + r * cols;
        const float* xhat = normalized.data() + r * cols;
        if (ng.requires_grad || nbeta.requires_grad) {
          for (std::size_t c = 0; c < cols; ++c) {
            if (ng.requires_grad) ng.grad[c] += gy[c] * xhat[c];
            if (nbeta.requires_grad) nbeta.grad[c] += gy[c];
          }
        }
        if (!nx.requires_grad) continue;
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double g = double(gy[c]) * ng.value[c];
          mean_g += g;
          mean_gx += g * xhat[c];
        }
        mean_g /= static_cast<double>(cols);
        mean_gx /= static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          const double g = double(gy[c]) * ng.value[c];
          nx.grad[r * cols + c] += static_cast<float>(
              inv_std[r] * (g - mean_g - xhat[c] * mean_gx));
        }
      }
    };
  }
  return Tensor(node);
}

Tensor Concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("concat: axis must be 0 or 1");
  }
  std::size_t total_rows = 0;
  std::size_t total_cols = 0;
  for (const Tensor& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) ShapeError("concat", parts[0], p);
      total_rows += p.rows();
    } else {
      if (p.rows() != parts[0].rows()) ShapeError("concat", parts[0], p);
      total_cols += p.cols();
    }
  }
  if (axis == 0) total_cols = parts[0].cols();
  if (axis == 1) total_rows = parts[0].rows();

  std::vector<float> out(total_rows * total_cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const auto pv = p.data();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) {
        const std::size_t dst = axis == 0 ? (offset + r) * total_cols + c
                                          : r * total_cols + offset + c;
        out[dst] = pv[r * p.cols() + c];
      }
    }
    offset += axis == 0 ? p.rows() : p.cols();
  }

  auto node = std::make_shared<Node>();
  node->op = "concat";
  node->shape = {total_rows, total_cols};
  node->value = std::move(out);
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  node->requires_grad = any_grad && GradEnabled();
  if (node->requires_grad) {
    node->grad.assign(node->value.size(), 0.0F);
    for (const Tensor& p : parts) node->inputs.push_back(p.node());
    node->backward_fn = [axis, total_cols](Node& self) {
      std::size_t off = 0;
      for (auto& in : self.inputs) {
        const std::size_t pc = in->shape.empty() ? 1 : in->shape.back();
        const std::size_t pr = in->value.size() / pc;
        if (in->requires_grad) {
          for (std::size_t r = 0; r < pr; ++r) {
            for (std::size_t c = 0; c < pc; ++c) {
              const std::size_t src = axis == 0 ? (off + r) * total_cols + c
                                                : r * total_cols + off + c;
              in->grad[r * pc + c] += self.grad[src];
            }
          }
        }
        off += axis == 0 ? pr : pc;
      }
    };
  }
  return Tensor(node);
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " +
                                ShapeToString(x.shape()) + " as " +
                                ShapeToString(shape));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  auto node = MakeNode("reshape", std::move(shape), std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [](Node& self) {
      Node& in = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        in.grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(node);
}

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  auto node = MakeNode("sum", {}, {static_cast<float>(total)}, {x});
  if (node->requires_grad) {
    node->backward_fn = [](Node& self) {
      Node& in = *self.inputs[0];
      for (float& g : in.grad) g += self.grad[0];
    };
  }
  return Tensor(node);
}

Tensor Embedding(const Tensor& table, std::span<const std::int64_t> ids) {
  RequireMatrix("embedding", table);
  const std::size_t n = table.shape()[0];
  const std::size_t d = table.shape()[1];
  const auto tv = table.data();
  std::vector<float> out(ids.size() * d);
  std::vector<std::int64_t> index(ids.begin(), ids.end());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= n) {
      throw std::invalid_argument("embedding: id " + std::to_string(index[i]) +
                                  " out of range for table " +
                                  ShapeToString(table.shape()));
    }
    std::copy_n(tv.data() + index[i] * d, d, out.data() + i * d);
  }
  if (index.empty()) throw std::invalid_argument("embedding: empty id list");
  auto node = MakeNode("embedding", {index.size(), d}, std::move(out),
                       {table});
  if (node->requires_grad) {
    node->backward_fn = [index = std::move(index), d](Node& self) {
      Node& t = *self.inputs[0];
      for (std::size_t i = 0; i < index.size(); ++i) {
        float* dst = t.grad.data() + index[i] * d;
        const float* src = self.grad.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    };
  }
  return Tensor(node);
}

Tensor Dropout(const Tensor& x, float rate, std::mt19937_64& rng) {
  if (rate < 0.0F || rate >= 1.0F) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  }
  if (rate == 0.0F) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const float scale = 1.0F / (1.0F - rate);
  std::vector<float> mask(x.numel());
  for (float& m : mask) m = keep(rng) ? scale : 0.0F;
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
  auto node = MakeNode("dropout", x.shape(), std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [mask = std::move(mask)](Node& self) {
      Node& in = *self.inputs[0];
      for (std::size_t i = 0; i < mask.size(); ++i) {
        in.grad[i] += self.grad[i] * mask[i];
      }
    };
  }
  return Tensor(node);
}

Tensor CausalAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                       std::size_t batch, std::size_t seq_len,
                       std::size_t num_heads,
                       std::span<const std::uint8_t> key_valid) {
  RequireMatrix("causal_attention", q);
  if (k.shape() != q.shape()) ShapeError("causal_attention", q, k);
  if (v.shape() != q.shape()) ShapeError("causal_attention", q, v);
  const std::size_t d = q.cols();
  if (q.rows() != batch * seq_len || key_valid.size() != batch * seq_len) {
    throw std::invalid_argument(
        "causal_attention: rows " + std::to_string(q.rows()) +
        " / mask length " + std::to_string(key_valid.size()) +
        " do not match batch*seq_len " + std::to_string(batch * seq_len));
  }
  if (num_heads == 0 || d % num_heads != 0) {
    throw std::invalid_argument("causal_attention: " +
                                std::to_string(num_heads) +
                                " heads do not divide width " +
                                std::to_string(d));
  }
  const std::size_t dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto qv = q.data();
  const auto kv = k.data();
  const auto vv = v.data();
  std::vector<std::uint8_t> valid(key_valid.begin(), key_valid.end());

  // probs[((b*H + h)*T + t)*T + s]; zero wherever s is inadmissible.
  std::vector<float> probs(batch * num_heads * seq_len * seq_len, 0.0F);
  std::vector<float> out(batch * seq_len * d, 0.0F);
  std::vector<double> logits(seq_len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t col = h * dh;
      for (std::size_t t = 0; t < seq_len; ++t) {
        const float* qrow = qv.data() + (b * seq_len + t) * d + col;
        double mx = -INFINITY;
        bool any = false;
        for (std::size_t s = 0; s <= t; ++s) {
          if (!valid[b * seq_len + s]) continue;
          const float* krow = kv.data() + (b * seq_len + s) * d + col;
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += double(qrow[c]) * krow[c];
          logits[s] = dot * inv_sqrt;
          mx = std::max(mx, logits[s]);
          any = true;
        }
        if (!any) continue;
        double total = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          if (!valid[b * seq_len + s]) continue;
          logits[s] = std::exp(logits[s] - mx);
          total += logits[s];
        }
        float* prow = probs.data() + ((b * num_heads + h) * seq_len + t) * seq_len;
        std::vector<double> acc(dh, 0.0);
        for (std::size_t s = 0; s <= t; ++s) {
          if (!valid[b * seq_len + s]) continue;
          const double p = logits[s] / total;
          prow[s] = static_cast<float>(p);
          const float* vrow = vv.data() + (b * seq_len + s) * d + col;
          for (std::size_t c = 0; c < dh; ++c) acc[c] += p * vrow[c];
        }
        float* orow = out.data() + (b * seq_len + t) * d + col;
        for (std::size_t c = 0; c < dh; ++c) orow[c] = static_cast<float>(acc[c]);
      }
    }
  }

  auto node = MakeNode("causal_attention", q.shape(), std::move(out),
                       {q, k, v});
  if (node->requires_grad) {
    node->backward_fn = [batch, seq_len, num_heads, d, dh, inv_sqrt,
                         probs = std::move(probs),
                         valid = std::move(valid)](Node& self) {
      Node& nq = *self.inputs[0];
      Node& nk = *self.inputs[1];
      Node& nv = *self.inputs[2];
      std::vector<double> dp(seq_len);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < num_heads; ++h) {
          const std::size_t col = h * dh;
          for (std::size_t t = 0; t < seq_len; ++t) {
            const float* prow =
                probs.data() + ((b * num_heads + h) * seq_len + t) * seq_len;
            const float* go = self.grad.data() + (b * seq_len + t) * d + col;
            double weighted = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
              if (!valid[b * seq_len + s] || prow[s] == 0.0F) {
                dp[s] = 0.0;
                continue;
              }
              const std::size_t row = (b * seq_len + s) * d + col;
              double dot = 0.0;
              for (std::size_t c = 0; c < dh; ++c) {
                dot += double(go[c]) * nv.value[row + c];
                if (nv.requires_grad) nv.grad[row + c] += prow[s] * go[c];
              }
              dp[s] = dot;
              weighted += dot * prow[s];
            }
            const std::size_t qrow = (b * seq_len + t) * d + col;
            for (std::size_t s = 0; s <= t; ++s) {
              if (!valid[b * seq_len + s] || prow[s] == 0.0F) continue;
              const double ds = prow[s] * (dp[s] - weighted) * inv_sqrt;
              const std::size_t krow = (b * seq_len + s) * d + col;
              for (std::size_t c = 0; c < dh; ++c) {
                if (nq.requires_grad) {
                  nq.grad[qrow + c] += static_cast<float>(ds * nk.value[krow + c]);
                }
                if (nk.requires_grad) {
                  nk.grad[krow + c] += static_cast<float>(ds * nq.value[qrow + c]);
                }
              }
            }
          }
        }
      }
    };
  }
  return Tensor(node);
}

Tensor SoftmaxCrossEntropy(const Tensor& logits,
                           std::span<const std::int64_t> targets,
                           std::span<const std::uint8_t> mask) {
  RequireMatrix("softmax_cross_entropy", logits);
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  if (targets.size() != rows || mask.size() != rows) {
    throw std::invalid_argument(
        "softmax_cross_entropy: " + std::to_string(targets.size()) +
        " targets / " + std::to_string(mask.size()) + " mask entries for " +
        std::to_string(rows) + " rows");
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols) {
      throw std::invalid_argument("softmax_cross_entropy: target " +
                                  std::to_string(targets[r]) +
                                  " out of range for " + std::to_string(cols) +
                                  " classes");
    }
    ++count;
  }
  if (count == 0) throw DataError("no supervised positions");

  const auto lv = logits.data();
  std::vector<float> probs(rows * cols, 0.0F);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    const float* row = lv.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
    const double log_z = mx + std::log(total);
    loss += log_z - row[targets[r]];
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] = static_cast<float>(std::exp(row[c] - log_z));
    }
  }
  loss /= static_cast<double>(count);

  std::vector<std::int64_t> target_copy(targets.begin(), targets.end());
  std::vector<std::uint8_t> mask_copy(mask.begin(), mask.end());
  auto node = MakeNode("softmax_cross_entropy", {},
                       {static_cast<float>(loss)}, {logits});
  if (node->requires_grad) {
    node->backward_fn = [rows, cols, count, probs = std::move(probs),
                         target_copy = std::move(target_copy),
                         mask_copy = std::move(mask_copy)](Node& self) {
      Node& in = *self.inputs[0];
      const double scale = self.grad[0] / static_cast<double>(count);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!mask_copy[r]) continue;
        for (std::size_t c = 0; c < cols; ++c) {
          double g = probs[r * cols + c];
          if (static_cast<std::int64_t>(c) == target_copy[r]) g -= 1.0;
          in.grad[r * cols + c] += static_cast<float>(g * scale);
        }
      }
    };
  }
  return Tensor(node);
}

}  // namespace dffrec::ad
