// Copyright 2026 The StageFormer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stageformer/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stageformer/autodiff/interp.hpp"
#include "stageformer/error.hpp"

namespace stageformer::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MutMap = Eigen::Map<RowMat>;

MutMap as_matrix(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MutMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

[[noreturn]] void shape_fail(const char* op, const std::string& what, const Tensor& a,
                             const Tensor& b) {
  throw ShapeError(std::string(op) + ": " + what + ": " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

void require_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail(op, "shapes differ", a, b);
}

// Splits a shape around `axis` into (outer, n, inner) extents.
struct AxisLayout {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisLayout axis_layout(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

bool wants(const Node& out, std::size_t i) {
  return out.inputs[i] && out.inputs[i]->requires_grad;
}

template <typename F>
Tensor unary(const char* op, const Tensor& a, F&& f, BackwardFn backward) {
  check_finite(op, a);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(op, a.shape(), std::move(out), {a}, std::move(backward));
}

}  // namespace

void check_finite(const char* op, const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(op) + ": non-finite input in tensor of shape " +
                           shape_str(t.shape()));
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  static constexpr const char* kOp = "matmul";
  require_2d(kOp, a);
  require_2d(kOp, b);
  if (a.dim(1) != b.dim(0)) shape_fail(kOp, "inner dimensions differ", a, b);
  check_finite(kOp, a);
  check_finite(kOp, b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  as_matrix(out, m, n).noalias() =
      as_matrix(a.node()->value, m, k) * as_matrix(b.node()->value, k, n);
  return make_result(kOp, {m, n}, std::move(out), {a, b}, [m, k, n](Node& o) {
    const auto g = as_matrix(o.grad, m, n);
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    if (na.requires_grad) {
      as_matrix(na.grad, m, k).noalias() += g * as_matrix(nb.value, k, n).transpose();
    }
    if (nb.requires_grad) {
      as_matrix(nb.grad, k, n).noalias() += as_matrix(na.value, m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  static constexpr const char* kOp = "transpose";
  require_2d(kOp, a);
  check_finite(kOp, a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  as_matrix(out, n, m) = as_matrix(a.node()->value, m, n).transpose();
  return make_result(kOp, {n, m}, std::move(out), {a}, [m, n](Node& o) {
    as_matrix(o.inputs[0]->grad, m, n) += as_matrix(o.grad, n, m).transpose();
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  static constexpr const char* kOp = "linear";
  require_2d(kOp, x);
  require_2d(kOp, w);
  if (x.dim(1) != w.dim(0)) shape_fail(kOp, "input width differs from weight rows", x, w);
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (bias.defined() && bias.numel() != n) shape_fail(kOp, "bias length differs", w, bias);
  check_finite(kOp, x);
  check_finite(kOp, w);
  if (bias.defined()) check_finite(kOp, bias);
  std::vector<double> out(m * n);
  auto y = as_matrix(out, m, n);
  y.noalias() = as_matrix(x.node()->value, m, k) * as_matrix(w.node()->value, k, n);
  if (bias.defined()) {
    y.rowwise() += as_matrix(bias.node()->value, 1, n).row(0);
  }
  return make_result(kOp, {m, n}, std::move(out), {x, w, bias}, [m, k, n](Node& o) {
    const auto g = as_matrix(o.grad, m, n);
    Node& nx = *o.inputs[0];
    Node& nw = *o.inputs[1];
    if (nx.requires_grad) {
      as_matrix(nx.grad, m, k).noalias() += g * as_matrix(nw.value, k, n).transpose();
    }
    if (nw.requires_grad) {
      as_matrix(nw.grad, k, n).noalias() += as_matrix(nx.value, m, k).transpose() * g;
    }
    if (wants(o, 2)) {
      as_matrix(o.inputs[2]->grad, 1, n) += g.colwise().sum();
    }
  });
}

Tensor scaled_dot_product(const Tensor& q, const Tensor& k) {
  require_2d("scaled_dot_product", q);
  require_2d("scaled_dot_product", k);
  if (q.dim(1) != k.dim(1)) shape_fail("scaled_dot_product", "feature widths differ", q, k);
  return scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
}

Tensor add(const Tensor& a, const Tensor& b) {
  static constexpr const char* kOp = "add";
  require_same_shape(kOp, a, b);
  check_finite(kOp, a);
  check_finite(kOp, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(kOp, a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (!wants(o, j)) continue;
      auto& g = o.inputs[j]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  static constexpr const char* kOp = "sub";
  require_same_shape(kOp, a, b);
  check_finite(kOp, a);
  check_finite(kOp, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(kOp, a.shape(), std::move(out), {a, b}, [](Node& o) {
    if (wants(o, 0)) {
      auto& g = o.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants(o, 1)) {
      auto& g = o.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  static constexpr const char* kOp = "mul";
  require_same_shape(kOp, a, b);
  check_finite(kOp, a);
  check_finite(kOp, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(kOp, a.shape(), std::move(out), {a, b}, [](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    if (na.requires_grad) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) nb.grad[i] += o.grad[i] * na.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  static constexpr const char* kOp = "div";
  require_same_shape(kOp, a, b);
  check_finite(kOp, a);
  check_finite(kOp, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (b.data()[i] == 0.0) throw NonFiniteError("div: division by zero");
    out[i] = a.data()[i] / b.data()[i];
  }
  return make_result(kOp, a.shape(), std::move(out), {a, b}, [](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double inv = 1.0 / nb.value[i];
      if (na.requires_grad) na.grad[i] += o.grad[i] * inv;
      if (nb.requires_grad) nb.grad[i] -= o.grad[i] * o.value[i] * inv;
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return x * s; }, [s](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * o.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  static constexpr const char* kOp = "add_row";
  require_2d(kOp, x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.numel() != n) shape_fail(kOp, "row length differs from matrix width", x, row);
  check_finite(kOp, x);
  check_finite(kOp, row);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row.data()[j];
  return make_result(kOp, x.shape(), std::move(out), {x, row}, [m, n](Node& o) {
    if (wants(o, 0)) {
      auto& g = o.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants(o, 1)) {
      auto& g = o.inputs[1]->grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& o) {
    Node& in = *o.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) {
      if (in.value[i] > 0.0) in.grad[i] += o.grad[i];
    }
  });
}

Tensor abs(const Tensor& a) {
  return unary("abs", a, [](double x) { return std::fabs(x); }, [](Node& o) {
    Node& in = *o.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) {
      const double v = in.value[i];
      in.grad[i] += v > 0.0 ? o.grad[i] : (v < 0.0 ? -o.grad[i] : 0.0);
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Node& o) {
        auto& g = o.inputs[0]->grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = o.value[i];
          g[i] += o.grad[i] * s * (1.0 - s);
        }
      });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw NonFiniteError("log: non-positive input " + std::to_string(v));
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](Node& o) {
    Node& in = *o.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += o.grad[i] / in.value[i];
  });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return unary("clamp_min", a, [lo](double x) { return x < lo ? lo : x; }, [lo](Node& o) {
    Node& in = *o.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) {
      if (in.value[i] >= lo) in.grad[i] += o.grad[i];
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  static constexpr const char* kOp = "softmax";
  const AxisLayout l = axis_layout(kOp, x.shape(), axis);
  check_finite(kOp, x);
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.n * l.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l.n; ++j) mx = std::max(mx, in[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.n; ++j) {
        const double e = std::exp(in[base + j * l.inner] - mx);
        out[base + j * l.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < l.n; ++j) out[base + j * l.inner] /= z;
    }
  }
  return make_result(kOp, x.shape(), std::move(out), {x}, [l](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t oi = 0; oi < l.outer; ++oi) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = oi * l.n * l.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < l.n; ++j) {
          const std::size_t at = base + j * l.inner;
          dot += o.grad[at] * o.value[at];
        }
        for (std::size_t j = 0; j < l.n; ++j) {
          const std::size_t at = base + j * l.inner;
          g[at] += o.value[at] * (o.grad[at] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  static constexpr const char* kOp = "log_softmax";
  const AxisLayout l = axis_layout(kOp, x.shape(), axis);
  check_finite(kOp, x);
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.n * l.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l.n; ++j) mx = std::max(mx, in[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.n; ++j) z += std::exp(in[base + j * l.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < l.n; ++j) {
        out[base + j * l.inner] = in[base + j * l.inner] - lse;
      }
    }
  }
  return make_result(kOp, x.shape(), std::move(out), {x}, [l](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t oi = 0; oi < l.outer; ++oi) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = oi * l.n * l.inner + i;
        double total = 0.0;
        for (std::size_t j = 0; j < l.n; ++j) total += o.grad[base + j * l.inner];
        for (std::size_t j = 0; j < l.n; ++j) {
          const std::size_t at = base + j * l.inner;
          g[at] += o.grad[at] - std::exp(o.value[at]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  static constexpr const char* kOp = "layer_norm";
  if (x.ndim() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  if (gamma.numel() != n) shape_fail(kOp, "gamma width differs", x, gamma);
  if (beta.numel() != n) shape_fail(kOp, "beta width differs", x, beta);
  check_finite(kOp, x);
  check_finite(kOp, gamma);
  check_finite(kOp, beta);

  std::vector<double> out(x.numel());
  std::vector<double> normed(x.numel());
  std::vector<double> rstd(rows);
  const auto in = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * rstd[r];
      normed[r * n + j] = h;
      out[r * n + j] = h * gm[j] + bt[j];
    }
  }
  return make_result(
      kOp, x.shape(), std::move(out), {x, gamma, beta},
      [n, rows, normed = std::move(normed), rstd = std::move(rstd)](Node& o) {
        Node& nx = *o.inputs[0];
        Node& ng = *o.inputs[1];
        Node& nb = *o.inputs[2];
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = o.grad.data() + r * n;
          const double* h = normed.data() + r * n;
          if (ng.requires_grad)
            for (std::size_t j = 0; j < n; ++j) ng.grad[j] += g[j] * h[j];
          if (nb.requires_grad)
            for (std::size_t j = 0; j < n; ++j) nb.grad[j] += g[j];
          if (!nx.requires_grad) continue;
          double sum_gh = 0.0, sum_ghh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = g[j] * ng.value[j];
            sum_gh += gh;
            sum_ghh += gh * h[j];
          }
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = g[j] * ng.value[j];
            nx.grad[r * n + j] += rstd[r] * (gh - inv_n * sum_gh - h[j] * inv_n * sum_ghh);
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  static constexpr const char* kOp = "conv1d";
  require_2d(kOp, x);
  if (weight.ndim() != 3) {
    throw ShapeError("conv1d: weight must be c_out x c_in x kernel, got " +
                     shape_str(weight.shape()));
  }
  if (stride == 0) throw ConfigError("conv1d: stride must be >= 1");
  const std::size_t len = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != c_in) shape_fail(kOp, "input channels differ", x, weight);
  if (bias.defined() && bias.numel() != c_out) shape_fail(kOp, "bias length differs", weight, bias);
  if (len + 2 * padding < kernel) shape_fail(kOp, "sequence shorter than kernel", x, weight);
  check_finite(kOp, x);
  check_finite(kOp, weight);
  if (bias.defined()) check_finite(kOp, bias);

  const std::size_t out_len = (len + 2 * padding - kernel) / stride + 1;
  std::vector<double> out(out_len * c_out, 0.0);
  const auto xv = x.data();
  const auto wv = weight.data();
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double acc = bias.defined() ? bias.data()[o] : 0.0;
      for (std::size_t k = 0; k < kernel; ++k) {
        const long src = static_cast<long>(t * stride + k) - static_cast<long>(padding);
        if (src < 0 || src >= static_cast<long>(len)) continue;
        const double* xr = xv.data() + static_cast<std::size_t>(src) * c_in;
        const double* wr = wv.data() + o * c_in * kernel + k;
        for (std::size_t c = 0; c < c_in; ++c) acc += wr[c * kernel] * xr[c];
      }
      out[t * c_out + o] = acc;
    }
  }
  return make_result(
      kOp, {out_len, c_out}, std::move(out), {x, weight, bias},
      [len, c_in, c_out, kernel, stride, padding, out_len](Node& o) {
        Node& nx = *o.inputs[0];
        Node& nw = *o.inputs[1];
        for (std::size_t t = 0; t < out_len; ++t) {
          for (std::size_t oc = 0; oc < c_out; ++oc) {
            const double g = o.grad[t * c_out + oc];
            if (g == 0.0) continue;
            if (wants(o, 2)) o.inputs[2]->grad[oc] += g;
            for (std::size_t k = 0; k < kernel; ++k) {
              const long src = static_cast<long>(t * stride + k) - static_cast<long>(padding);
              if (src < 0 || src >= static_cast<long>(len)) continue;
              const std::size_t s = static_cast<std::size_t>(src);
              for (std::size_t c = 0; c < c_in; ++c) {
                const std::size_t wi = oc * c_in * kernel + c * kernel + k;
                if (nx.requires_grad) nx.grad[s * c_in + c] += g * nw.value[wi];
                if (nw.requires_grad) nw.grad[wi] += g * nx.value[s * c_in + c];
              }
            }
          }
        }
      });
}

Tensor cumsum(const Tensor& x, std::size_t axis) {
  static constexpr const char* kOp = "cumsum";
  const AxisLayout l = axis_layout(kOp, x.shape(), axis);
  check_finite(kOp, x);
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.n * l.inner + i;
      double acc = 0.0;
      for (std::size_t j = 0; j < l.n; ++j) {
        acc += in[base + j * l.inner];
        out[base + j * l.inner] = acc;
      }
    }
  }
  return make_result(kOp, x.shape(), std::move(out), {x}, [l](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t oi = 0; oi < l.outer; ++oi) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = oi * l.n * l.inner + i;
        double acc = 0.0;
        for (std::size_t j = l.n; j-- > 0;) {
          acc += o.grad[base + j * l.inner];
          g[base + j * l.inner] += acc;
        }
      }
    }
  });
}

Tensor interp_gather(const Tensor& values, const Tensor& positions) {
  static constexpr const char* kOp = "interp_gather";
  if (values.ndim() != 1) {
    throw ShapeError("interp_gather: values must be 1-D, got " + shape_str(values.shape()));
  }
  check_finite(kOp, values);
  check_finite(kOp, positions);
  const long n = static_cast<long>(values.numel());
  std::vector<double> out(positions.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sample_linear(values.data().data(), n, 1, positions.data()[i]).value;
  }
  return make_result(kOp, positions.shape(), std::move(out), {values, positions}, [n](Node& o) {
    Node& nv = *o.inputs[0];
    Node& np = *o.inputs[1];
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double g = o.grad[i];
      const LinearSample s = sample_linear(nv.value.data(), n, 1, np.value[i]);
      if (np.requires_grad) np.grad[i] += g * s.slope;
      if (nv.requires_grad) {
        if (s.lo >= 0 && s.lo < n) nv.grad[static_cast<std::size_t>(s.lo)] += g * (1.0 - s.frac);
        if (s.lo + 1 >= 0 && s.lo + 1 < n) nv.grad[static_cast<std::size_t>(s.lo + 1)] += g * s.frac;
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result("sum", {}, {acc}, {x}, [](Node& o) {
    for (double& g : o.inputs[0]->grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  static constexpr const char* kOp = "pick";
  require_2d(kOp, x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (index.size() != m) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " +
                     shape_str(x.shape()));
  }
  check_finite(kOp, x);
  std::vector<double> out(m);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t i = 0; i < m; ++i) {
    if (idx[i] >= n) {
      throw ShapeError("pick: index " + std::to_string(idx[i]) + " out of range for " +
                       shape_str(x.shape()));
    }
    out[i] = x.data()[i * n + idx[i]];
  }
  return make_result(kOp, {m}, std::move(out), {x}, [n, idx = std::move(idx)](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * n + idx[i]] += o.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  static constexpr const char* kOp = "concat_rows";
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_2d(kOp, p);
    if (p.dim(1) != n) shape_fail(kOp, "widths differ", parts[0], p);
    check_finite(kOp, p);
    total += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(total * n);
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result(kOp, {total, n}, std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     [offsets = std::move(offsets)](Node& o) {
                       for (std::size_t j = 0; j < o.inputs.size(); ++j) {
                         if (!wants(o, j)) continue;
                         auto& g = o.inputs[j]->grad;
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[offsets[j] + i];
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_2d("slice_rows", x);
  const std::size_t n = x.dim(1);
  if (begin + count > x.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin() + static_cast<long>(begin * n),
                          x.data().begin() + static_cast<long>((begin + count) * n));
  return make_result("slice_rows", {count, n}, std::move(out), {x}, [begin, n](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * n + i] += o.grad[i];
  });
}

Tensor repeat_rows(const Tensor& row, std::size_t m) {
  check_finite("repeat_rows", row);
  const std::size_t n = row.numel();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    std::copy(row.data().begin(), row.data().end(), out.begin() + static_cast<long>(i * n));
  return make_result("repeat_rows", {m, n}, std::move(out), {row}, [m, n](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
  });
}

Tensor repeat_cols(const Tensor& col, std::size_t n) {
  check_finite("repeat_cols", col);
  const std::size_t m = col.numel();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = col.data()[i];
  return make_result("repeat_cols", {m, n}, std::move(out), {col}, [m, n](Node& o) {
    auto& g = o.inputs[0]->grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i] += o.grad[i * n + j];
  });
}

}  // namespace stageformer::ad
