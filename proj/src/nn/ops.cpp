// Copyright 2026 The Prosodia Authors
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

#include "prosodia/nn/ops.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <cmath>
#include <numeric>

#include "prosodia/error.hpp"

namespace prosodia::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;

// Plain left-to-right sum. Eigen's vectorized reductions peel by address, so
// their rounding would vary with heap alignment.
double row_sum(const double* p, std::size_t n) { return std::accumulate(p, p + n, 0.0); }

void check_finite(const std::vector<double>& v, const char* op) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw NumericError(fmt::format("{}: non-finite output at element {}", op, i));
  }
}

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw ValidationError(fmt::format("{}: {}", op, what));
}

Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
               std::function<void(Node&)> bw) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

// Parent k of an op node when it takes gradients, else nullptr.
Node* grad_target(Node& self, std::size_t k) {
  Node* p = self.parents[k].get();
  return p->requires_grad ? p : nullptr;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  constexpr const char* op = "conv1d";
  require(x.rank() == 2, op, fmt::format("input must be [C, L], got {}", shape_string(x.shape())));
  require(w.rank() == 3, op, fmt::format("weight must be [Cout, Cin, K], got {}", shape_string(w.shape())));
  require(w.dim(1) == x.dim(0), op,
          fmt::format("input has {} channels, weight expects {}", x.dim(0), w.dim(1)));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), op, "bias must be [Cout]");
  require(stride >= 1, op, "stride must be >= 1");
  const std::size_t cin = x.dim(0), len = x.dim(1), cout = w.dim(0), k = w.dim(2);
  require(len + 2 * pad >= k, op, fmt::format("input length {} too short for kernel {}", len, k));
  const std::size_t lout = (len + 2 * pad - k) / stride + 1;

  auto cols = std::make_shared<RowMat>(cin * k, lout);
  const double* xv = x.values().data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      double* row = cols->row(c * k + j).data();
      for (std::size_t t = 0; t < lout; ++t) {
        const auto src = static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad);
        row[t] = (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) ? xv[c * len + src] : 0.0;
      }
    }
  }
  std::vector<double> out(cout * lout);
  CMapR wm(w.values().data(), cout, cin * k);
  MapR om(out.data(), cout, lout);
  om.noalias() = wm * (*cols);
  for (std::size_t o = 0; o < cout; ++o) om.row(o).array() += b.values()[o];

  return make_op(op, {cout, lout}, std::move(out), {x, w, b},
                 [cols, cin, len, cout, k, lout, stride, pad](Node& self) {
                   CMapR g(self.grad.data(), cout, lout);
                   Node* px = grad_target(self, 0);
                   Node* pw = grad_target(self, 1);
                   Node* pb = grad_target(self, 2);
                   if (pw) {
                     MapR gw(pw->ensure_grad().data(), cout, cin * k);
                     gw.noalias() += g * cols->transpose();
                   }
                   if (pb) {
                     auto& gb = pb->ensure_grad();
                     for (std::size_t o = 0; o < cout; ++o) gb[o] += row_sum(self.grad.data() + o * lout, lout);
                   }
                   if (px) {
                     CMapR wm(self.parents[1]->value.data(), cout, cin * k);
                     RowMat dcols = wm.transpose() * g;
                     auto& gx = px->ensure_grad();
                     for (std::size_t c = 0; c < cin; ++c) {
                       for (std::size_t j = 0; j < k; ++j) {
                         const double* row = dcols.row(c * k + j).data();
                         for (std::size_t t = 0; t < lout; ++t) {
                           const auto src =
                               static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad);
                           if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) gx[c * len + src] += row[t];
                         }
                       }
                     }
                   }
                 });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  constexpr const char* op = "conv2d";
  require(x.rank() == 3, op, fmt::format("input must be [C, H, W], got {}", shape_string(x.shape())));
  require(w.rank() == 4, op, fmt::format("weight must be [Cout, Cin, KH, KW], got {}", shape_string(w.shape())));
  require(w.dim(1) == x.dim(0), op,
          fmt::format("input has {} channels, weight expects {}", x.dim(0), w.dim(1)));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), op, "bias must be [Cout]");
  require(stride >= 1, op, "stride must be >= 1");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(h + 2 * pad >= kh && wd + 2 * pad >= kw, op,
          fmt::format("input {} too small for kernel {}x{}", shape_string(x.shape()), kh, kw));
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (wd + 2 * pad - kw) / stride + 1;
  const std::size_t patches = ho * wo;

  // Flat source index per (kernel tap, output position); -1 marks padding.
  auto index = std::make_shared<std::vector<std::ptrdiff_t>>(cin * kh * kw * patches);
  auto cols = std::make_shared<RowMat>(cin * kh * kw, patches);
  const double* xv = x.values().data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const std::size_t r = (c * kh + i) * kw + j;
        double* row = cols->row(r).data();
        std::ptrdiff_t* irow = index->data() + r * patches;
        for (std::size_t y = 0; y < ho; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y * stride + i) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t z = 0; z < wo; ++z) {
            const auto sz = static_cast<std::ptrdiff_t>(z * stride + j) - static_cast<std::ptrdiff_t>(pad);
            const bool inside = sy >= 0 && sy < static_cast<std::ptrdiff_t>(h) && sz >= 0 &&
                                sz < static_cast<std::ptrdiff_t>(wd);
            const std::ptrdiff_t src = inside ? static_cast<std::ptrdiff_t>(c * h * wd) + sy * wd + sz : -1;
            irow[y * wo + z] = src;
            row[y * wo + z] = inside ? xv[src] : 0.0;
          }
        }
      }
    }
  }
  std::vector<double> out(cout * patches);
  CMapR wm(w.values().data(), cout, cin * kh * kw);
  MapR om(out.data(), cout, patches);
  om.noalias() = wm * (*cols);
  for (std::size_t o = 0; o < cout; ++o) om.row(o).array() += b.values()[o];

  const std::size_t taps = cin * kh * kw;
  return make_op(op, {cout, ho, wo}, std::move(out), {x, w, b}, [cols, index, cout, taps, patches](Node& self) {
    CMapR g(self.grad.data(), cout, patches);
    Node* px = grad_target(self, 0);
    Node* pw = grad_target(self, 1);
    Node* pb = grad_target(self, 2);
    if (pw) {
      MapR gw(pw->ensure_grad().data(), cout, taps);
      gw.noalias() += g * cols->transpose();
    }
    if (pb) {
      auto& gb = pb->ensure_grad();
      for (std::size_t o = 0; o < cout; ++o) gb[o] += row_sum(self.grad.data() + o * patches, patches);
    }
    if (px) {
      CMapR wm(self.parents[1]->value.data(), cout, taps);
      RowMat dcols = wm.transpose() * g;
      auto& gx = px->ensure_grad();
      const std::ptrdiff_t* idx = index->data();
      const double* d = dcols.data();
      for (std::size_t e = 0; e < taps * patches; ++e) {
        if (idx[e] >= 0) gx[idx[e]] += d[e];
      }
    }
  });
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  constexpr const char* op = "instance_norm";
  require(x.rank() >= 2, op, "input needs a channel axis and at least one spatial axis");
  const std::size_t c = x.dim(0), s = x.size() / c;
  require(gamma.rank() == 1 && gamma.dim(0) == c && beta.rank() == 1 && beta.dim(0) == c, op,
          fmt::format("gamma/beta must be [{}]", c));

  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(c);
  std::vector<double> out(x.size());
  const double* xv = x.values().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* xs = xv + ch * s;
    double mu = 0.0;
    for (std::size_t i = 0; i < s; ++i) mu += xs[i];
    mu /= static_cast<double>(s);
    double var = 0.0;
    for (std::size_t i = 0; i < s; ++i) var += (xs[i] - mu) * (xs[i] - mu);
    var /= static_cast<double>(s);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[ch] = is;
    const double gm = gamma.values()[ch], bt = beta.values()[ch];
    for (std::size_t i = 0; i < s; ++i) {
      const double xh = (xs[i] - mu) * is;
      (*xhat)[ch * s + i] = xh;
      out[ch * s + i] = gm * xh + bt;
    }
  }
  return make_op(op, x.shape(), std::move(out), {x, gamma, beta}, [xhat, inv_std, c, s](Node& self) {
    const auto& g = self.grad;
    Node* px = grad_target(self, 0);
    Node* pg = grad_target(self, 1);
    Node* pb = grad_target(self, 2);
    const auto& gamma_v = self.parents[1]->value;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* gs = g.data() + ch * s;
      const double* xh = xhat->data() + ch * s;
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < s; ++i) {
        sum_g += gs[i];
        sum_gx += gs[i] * xh[i];
      }
      if (pg) pg->ensure_grad()[ch] += sum_gx;
      if (pb) pb->ensure_grad()[ch] += sum_g;
      if (px) {
        auto& gx = px->ensure_grad();
        const double k = gamma_v[ch] * (*inv_std)[ch] / static_cast<double>(s);
        const double n = static_cast<double>(s);
        for (std::size_t i = 0; i < s; ++i) gx[ch * s + i] += k * (n * gs[i] - sum_g - xh[i] * sum_gx);
      }
    }
  });
}

Tensor glu(const Tensor& x) {
  constexpr const char* op = "glu";
  require(x.rank() >= 1 && x.dim(0) % 2 == 0, op,
          fmt::format("leading axis must be even, got {}", shape_string(x.shape())));
  const std::size_t half = x.size() / 2;
  Shape shape = x.shape();
  shape[0] /= 2;
  auto gate = std::make_shared<std::vector<double>>(half);
  std::vector<double> out(half);
  const double* xv = x.values().data();
  for (std::size_t i = 0; i < half; ++i) {
    const double sg = 1.0 / (1.0 + std::exp(-xv[half + i]));
    (*gate)[i] = sg;
    out[i] = xv[i] * sg;
  }
  return make_op(op, std::move(shape), std::move(out), {x}, [gate, half](Node& self) {
    Node* px = grad_target(self, 0);
    if (!px) return;
    auto& gx = px->ensure_grad();
    const auto& xv = px->value;
    for (std::size_t i = 0; i < half; ++i) {
      const double sg = (*gate)[i];
      gx[i] += self.grad[i] * sg;
      gx[half + i] += self.grad[i] * xv[i] * sg * (1.0 - sg);
    }
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return make_op("leaky_relu", x.shape(), std::move(out), {x}, [slope](Node& self) {
    Node* px = grad_target(self, 0);
    if (!px) return;
    auto& gx = px->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (px->value[i] > 0.0 ? 1.0 : slope);
  });
}

Tensor upsample_nearest1d(const Tensor& x, std::size_t factor) {
  constexpr const char* op = "upsample_nearest1d";
  require(x.rank() == 2, op, fmt::format("input must be [C, L], got {}", shape_string(x.shape())));
  require(factor >= 1, op, "factor must be >= 1");
  const std::size_t c = x.dim(0), len = x.dim(1);
  std::vector<double> out(c * len * factor);
  const auto xv = x.values();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t t = 0; t < len * factor; ++t) out[ch * len * factor + t] = xv[ch * len + t / factor];
  return make_op(op, {c, len * factor}, std::move(out), {x}, [c, len, factor](Node& self) {
    Node* px = grad_target(self, 0);
    if (!px) return;
    auto& gx = px->ensure_grad();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t t = 0; t < len * factor; ++t) gx[ch * len + t / factor] += self.grad[ch * len * factor + t];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add",
          fmt::format("shape mismatch {} vs {}", shape_string(a.shape()), shape_string(b.shape())));
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Node* p = grad_target(self, k)) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub",
          fmt::format("shape mismatch {} vs {}", shape_string(a.shape()), shape_string(b.shape())));
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return make_op("scale", x.shape(), std::move(out), {x}, [factor](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_size(shape) == x.size(), "reshape",
          fmt::format("cannot reshape {} to {}", shape_string(x.shape()), shape_string(shape)));
  return make_op("reshape", std::move(shape), std::vector<double>(x.values().begin(), x.values().end()), {x},
                 [](Node& self) {
                   if (Node* p = grad_target(self, 0)) {
                     auto& g = p->ensure_grad();
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                   }
                 });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  constexpr const char* op = "matmul";
  require(a.rank() == 2, op, "left operand must be [M, K]");
  require(b.rank() == 1 || b.rank() == 2, op, "right operand must be [K] or [K, N]");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.rank() == 1 ? 1 : b.dim(1);
  require(b.dim(0) == k, op, fmt::format("inner dimensions {} and {} differ", k, b.dim(0)));
  std::vector<double> out(m * n);
  MapR(out.data(), m, n).noalias() = CMapR(a.values().data(), m, k) * CMapR(b.values().data(), k, n);
  Shape shape = b.rank() == 1 ? Shape{m} : Shape{m, n};
  return make_op(op, std::move(shape), std::move(out), {a, b}, [m, k, n](Node& self) {
    CMapR g(self.grad.data(), m, n);
    if (Node* pa = grad_target(self, 0)) {
      MapR(pa->ensure_grad().data(), m, k).noalias() += g * CMapR(self.parents[1]->value.data(), k, n).transpose();
    }
    if (Node* pb = grad_target(self, 1)) {
      MapR(pb->ensure_grad().data(), k, n).noalias() += CMapR(self.parents[0]->value.data(), m, k).transpose() * g;
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_op("sum", {1}, {s}, {x}, [](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      for (auto& g : p->ensure_grad()) g += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_squared_offset(const Tensor& x, double target) {
  const auto n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.values()) s += (v - target) * (v - target);
  return make_op("mean_squared_offset", {1}, {s / n}, {x}, [target, n](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * 2.0 * (p->value[i] - target) / n;
    }
  });
}

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mean_abs_diff",
          fmt::format("shape mismatch {} vs {}", shape_string(a.shape()), shape_string(b.shape())));
  const auto n = static_cast<double>(a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.values()[i] - b.values()[i]);
  return make_op("mean_abs_diff", {1}, {s / n}, {a, b}, [n](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const double g0 = self.grad[0] / n;
    Node* pa = grad_target(self, 0);
    Node* pb = grad_target(self, 1);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - bv[i];
      const double sg = d > 0.0 ? g0 : (d < 0.0 ? -g0 : 0.0);
      if (pa) pa->ensure_grad()[i] += sg;
      if (pb) pb->ensure_grad()[i] -= sg;
    }
  });
}

}  // namespace prosodia::nn
