// Copyright 2026 The mftts Authors
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

#include "mftts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mftts/error.hpp"

namespace mftts {

namespace {

thread_local bool g_grad_enabled = true;
bool g_check_finite = false;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void set_check_finite(bool on) { g_check_finite = on; }
bool check_finite_enabled() { return g_check_finite; }

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data,
                          bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dims must be positive, got " +
                                     shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " elements, got " + std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::randn(Shape shape, Rng& rng, double stddev,
                           bool requires_grad) {
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(rng.normal() * stddev);
  return from(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape()));
  }
  return shape()[axis];
}

template <typename T>
std::size_t Tensor<T>::size() const {
  return shape_numel(shape());
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  shape();
  return node_->data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  shape();
  if (!node_->is_leaf()) {
    throw ContractError(std::string("mutable_data on non-leaf tensor from ") +
                        node_->op);
  }
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) {
    throw DimensionError("item() needs one element, shape is " +
                         shape_str(shape()));
  }
  return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= dim(0) || col >= dim(1)) {
    throw DimensionError("at(" + std::to_string(row) + "," +
                         std::to_string(col) + ") on " + shape_str(shape()));
  }
  return node_->data[row * dim(1) + col];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  shape();
  if (!node_->is_leaf()) {
    throw ContractError("requires_grad can only be set on leaves");
  }
  node_->requires_grad = on;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  shape();
  return node_->ensure_grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->data, false);
}

template <typename T>
const char* Tensor<T>::op_name() const {
  return node_ ? node_->op : "undefined";
}

template <typename T>
Tensor<T> Tensor<T>::make(Shape shape, std::vector<T> data, const char* op,
                          std::vector<Tensor> inputs,
                          std::function<void(detail::Node<T>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (g_check_finite) {
    for (const T& v : node->data) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value produced by ") + op);
      }
    }
  }
  const bool track =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

template <typename T>
void Tensor<T>::backward() const {
  if (size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw ContractError(
        "backward() on a tensor that was not produced by a recorded graph");
  }
  // Post-order DFS gives a topological order with parents first.
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <typename T>
using NodeT = detail::Node<T>;

// Index into `b` for each flat index of `a`; empty when shapes are equal.
std::vector<std::size_t> broadcast_map(const Shape& a, const Shape& b,
                                       const char* op) {
  if (a == b) return {};
  const std::size_t n = shape_numel(a);
  if (shape_numel(b) == 1) return std::vector<std::size_t>(n, 0);
  if (b.size() > a.size()) {
    throw DimensionError(std::string(op) + ": cannot broadcast " +
                         shape_str(b) + " into " + shape_str(a));
  }
  Shape padded(a.size() - b.size(), 1);
  padded.insert(padded.end(), b.begin(), b.end());
  std::vector<std::size_t> stride(a.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = a.size(); i-- > 0;) {
    if (padded[i] != a[i] && padded[i] != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " +
                           shape_str(b) + " into " + shape_str(a));
    }
    stride[i] = padded[i] == 1 ? 0 : s;
    s *= padded[i];
  }
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(a.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < a.size(); ++d) off += idx[d] * stride[d];
    map[flat] = off;
    for (std::size_t d = a.size(); d-- > 0;) {
      if (++idx[d] < a[d]) break;
      idx[d] = 0;
    }
  }
  return map;
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op,
                 const char* name) {
  auto map = broadcast_map(a.shape(), b.shape(), name);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t n = av.size();
  std::vector<T> out(n);
  auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
  for (std::size_t i = 0; i < n; ++i) {
    const T x = av[i], y = bv[bi(i)];
    switch (op) {
      case BinOp::kAdd: out[i] = x + y; break;
      case BinOp::kSub: out[i] = x - y; break;
      case BinOp::kMul: out[i] = x * y; break;
      case BinOp::kDiv: out[i] = x / y; break;
    }
  }
  return Tensor<T>::make(
      a.shape(), std::move(out), name, {a, b},
      [op, map = std::move(map)](NodeT<T>& self) {
        NodeT<T>& A = *self.parents[0];
        NodeT<T>& B = *self.parents[1];
        const auto& g = self.grad;
        auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
        if (A.requires_grad) {
          auto& ga = A.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            switch (op) {
              case BinOp::kAdd:
              case BinOp::kSub: ga[i] += g[i]; break;
              case BinOp::kMul: ga[i] += g[i] * B.data[bi(i)]; break;
              case BinOp::kDiv: ga[i] += g[i] / B.data[bi(i)]; break;
            }
          }
        }
        if (B.requires_grad) {
          auto& gb = B.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = bi(i);
            switch (op) {
              case BinOp::kAdd: gb[j] += g[i]; break;
              case BinOp::kSub: gb[j] -= g[i]; break;
              case BinOp::kMul: gb[j] += g[i] * A.data[i]; break;
              case BinOp::kDiv: {
                const T y = B.data[j];
                gb[j] -= g[i] * A.data[i] / (y * y);
                break;
              }
            }
          }
        }
      });
}

// Unary op with derivative expressed through input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, const char* name, F f, D df) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return Tensor<T>::make(x.shape(), std::move(out), name, {x},
                         [df](NodeT<T>& self) {
                           NodeT<T>& X = *self.parents[0];
                           auto& gx = X.ensure_grad();
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             gx[i] += self.grad[i] * df(X.data[i], self.data[i]);
                           }
                         });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kAdd, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kSub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kMul, "mul");
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kDiv, "div");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(
      a, "scale", [factor](T x) { return x * factor; },
      [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(
      a, "add_scalar", [value](T x) { return x + value; },
      [](T, T) { return T(1); });
}

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  return unary(
      x, "gelu",
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v))); },
      [](T v, T) {
        const T th = std::tanh(kC * (v + kA * v * v * v));
        return T(0.5) * (T(1) + th) +
               T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        return v >= 0 ? T(1) / (T(1) + std::exp(-v))
                      : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary(
      x, "log", [](T v) { return std::log(v); },
      [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary(
      x, "sqrt", [](T v) { return std::sqrt(v); },
      [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      x, "square", [](T v) { return v * v; },
      [](T v, T) { return T(2) * v; });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const T* A = a.data().data();
  const T* B = b.data().data();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* c = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return Tensor<T>::make(
      {m, n}, std::move(out), "matmul", {a, b},
      [m, k, n](NodeT<T>& self) {
        NodeT<T>& Am = *self.parents[0];
        NodeT<T>& Bm = *self.parents[1];
        const T* g = self.grad.data();
        if (Am.requires_grad) {
          T* ga = Am.ensure_grad().data();
          const T* B = Bm.data.data();
          for (std::size_t i = 0; i < m; ++i) {
            const T* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const T* brow = B + p * n;
              T s = 0;
              for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
              ga[i * k + p] += s;
            }
          }
        }
        if (Bm.requires_grad) {
          T* gb = Bm.ensure_grad().data();
          const T* A = Am.data.data();
          for (std::size_t i = 0; i < m; ++i) {
            const T* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const T av = A[i * k + p];
              T* gbrow = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose needs rank 2, got " + shape_str(a.shape()));
  }
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.data();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor<T>::make({n, m}, std::move(out), "transpose", {a},
                         [m, n](NodeT<T>& self) {
                           auto& ga = self.parents[0]->ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j)
                               ga[i * n + j] += self.grad[j * m + i];
                         });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " +
                         shape_str(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::make(std::move(shape), std::move(out), "reshape", {a},
                         [](NodeT<T>& self) {
                           auto& ga = self.parents[0]->ensure_grad();
                           for (std::size_t i = 0; i < ga.size(); ++i)
                             ga[i] += self.grad[i];
                         });
}

namespace {

// outer x axis x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Shape shape = parts[0].shape();
  const AxisSplit first = split_axis(shape, axis, "concat");
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) {
      throw DimensionError("concat: rank mismatch " + shape_str(shape) +
                           " vs " + shape_str(s));
    }
    total += s[axis];
    s[axis] = shape[axis];
    if (s != shape) {
      throw DimensionError("concat: shape mismatch " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
  }
  shape[axis] = total;
  const std::size_t outer = first.outer, inner = first.inner;
  std::vector<T> out(outer * total * inner);
  std::vector<std::size_t> lens;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[axis];
    const auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * len * inner, len * inner,
                  out.begin() + (o * total + offset) * inner);
    }
    lens.push_back(len);
    offset += len;
  }
  return Tensor<T>::make(
      std::move(shape), std::move(out), "concat", parts,
      [outer, inner, total, lens = std::move(lens)](NodeT<T>& self) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < lens.size(); ++pi) {
          NodeT<T>& P = *self.parents[pi];
          const std::size_t len = lens[pi];
          if (P.requires_grad) {
            auto& gp = P.ensure_grad();
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < len * inner; ++i)
                gp[o * len * inner + i] +=
                    self.grad[(o * total + off) * inner + i];
          }
          off += len;
        }
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin,
                std::size_t end) {
  const AxisSplit s = split_axis(a.shape(), axis, "slice");
  if (begin >= end || end > s.len) {
    throw DimensionError("slice: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for axis " +
                         std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  const std::size_t len = end - begin;
  shape[axis] = len;
  const auto av = a.data();
  std::vector<T> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.begin() + (o * s.len + begin) * s.inner, len * s.inner,
                out.begin() + o * len * s.inner);
  }
  return Tensor<T>::make(std::move(shape), std::move(out), "slice", {a},
                         [s, begin, len](NodeT<T>& self) {
                           auto& ga = self.parents[0]->ensure_grad();
                           for (std::size_t o = 0; o < s.outer; ++o)
                             for (std::size_t i = 0; i < len * s.inner; ++i)
                               ga[(o * s.len + begin) * s.inner + i] +=
                                   self.grad[o * len * s.inner + i];
                         });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return Tensor<T>::make({}, {s}, "sum", {a}, [](NodeT<T>& self) {
    auto& ga = self.parents[0]->ensure_grad();
    for (auto& g : ga) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.size());
  T s = 0;
  for (T v : a.data()) s += v;
  return Tensor<T>::make({}, {s * inv}, "mean", {a}, [inv](NodeT<T>& self) {
    auto& ga = self.parents[0]->ensure_grad();
    for (auto& g : ga) g += self.grad[0] * inv;
  });
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& a, std::size_t axis, bool average) {
  const AxisSplit s = split_axis(a.shape(), axis, average ? "mean_axis"
                                                          : "sum_axis");
  const T factor = average ? T(1) / static_cast<T>(s.len) : T(1);
  Shape shape = a.shape();
  shape[axis] = 1;
  const auto av = a.data();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += av[(o * s.len + l) * s.inner + i];
  for (auto& v : out) v *= factor;
  return Tensor<T>::make(std::move(shape), std::move(out),
                         average ? "mean_axis" : "sum_axis", {a},
                         [s, factor](NodeT<T>& self) {
                           auto& ga = self.parents[0]->ensure_grad();
                           for (std::size_t o = 0; o < s.outer; ++o)
                             for (std::size_t l = 0; l < s.len; ++l)
                               for (std::size_t i = 0; i < s.inner; ++i)
                                 ga[(o * s.len + l) * s.inner + i] +=
                                     self.grad[o * s.inner + i] * factor;
                         });
}

}  // namespace

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis(a, axis, false);
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis(a, axis, true);
}

// ---------------------------------------------------------------------------
// Softmax family

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mx = xv[base];
      for (std::size_t l = 1; l < s.len; ++l)
        mx = std::max(mx, xv[base + l * s.inner]);
      T z = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(xv[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return Tensor<T>::make(x.shape(), std::move(out), "softmax", {x},
                         [s](NodeT<T>& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           const auto& y = self.data;
                           const auto& g = self.grad;
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t i = 0; i < s.inner; ++i) {
                               const std::size_t base = o * s.len * s.inner + i;
                               T dot = 0;
                               for (std::size_t l = 0; l < s.len; ++l) {
                                 const std::size_t k = base + l * s.inner;
                                 dot += g[k] * y[k];
                               }
                               for (std::size_t l = 0; l < s.len; ++l) {
                                 const std::size_t k = base + l * s.inner;
                                 gx[k] += y[k] * (g[k] - dot);
                               }
                             }
                           }
                         });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mx = xv[base];
      for (std::size_t l = 1; l < s.len; ++l)
        mx = std::max(mx, xv[base + l * s.inner]);
      T z = 0;
      for (std::size_t l = 0; l < s.len; ++l)
        z += std::exp(xv[base + l * s.inner] - mx);
      const T lse = mx + std::log(z);
      for (std::size_t l = 0; l < s.len; ++l)
        out[base + l * s.inner] = xv[base + l * s.inner] - lse;
    }
  }
  return Tensor<T>::make(x.shape(), std::move(out), "log_softmax", {x},
                         [s](NodeT<T>& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           const auto& y = self.data;
                           const auto& g = self.grad;
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t i = 0; i < s.inner; ++i) {
                               const std::size_t base = o * s.len * s.inner + i;
                               T gs = 0;
                               for (std::size_t l = 0; l < s.len; ++l)
                                 gs += g[base + l * s.inner];
                               for (std::size_t l = 0; l < s.len; ++l) {
                                 const std::size_t k = base + l * s.inner;
                                 gx[k] += g[k] - std::exp(y[k]) * gs;
                               }
                             }
                           }
                         });
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& x,
                         std::span<const std::uint8_t> keep) {
  if (x.rank() != 2 || keep.size() != x.size()) {
    throw DimensionError("masked_softmax: mask of " +
                         std::to_string(keep.size()) + " entries for " +
                         shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto xv = x.data();
  std::vector<T> out(xv.size(), T(0));
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    T mx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep[i * n + j]) continue;
      mx = any ? std::max(mx, xv[i * n + j]) : xv[i * n + j];
      any = true;
    }
    if (!any) {
      throw ContractError("masked_softmax: row " + std::to_string(i) +
                          " is fully masked");
    }
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep[i * n + j]) continue;
      out[i * n + j] = std::exp(xv[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return Tensor<T>::make(x.shape(), std::move(out), "masked_softmax", {x},
                         [m, n](NodeT<T>& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           const auto& y = self.data;
                           const auto& g = self.grad;
                           for (std::size_t i = 0; i < m; ++i) {
                             T dot = 0;
                             for (std::size_t j = 0; j < n; ++j)
                               dot += g[i * n + j] * y[i * n + j];
                             for (std::size_t j = 0; j < n; ++j)
                               gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
                           }
                         });
}

// ---------------------------------------------------------------------------
// LayerNorm

namespace {

template <typename T>
Tensor<T> layer_norm_impl(const Tensor<T>& x, const Tensor<T>* gamma,
                          const Tensor<T>* beta) {
  if (x.rank() == 0) throw DimensionError("layer_norm on a scalar");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  if (gamma && (gamma->size() != d || beta->size() != d)) {
    throw DimensionError("layer_norm: last dim " + std::to_string(d) +
                         " vs gamma " + shape_str(gamma->shape()) +
                         " / beta " + shape_str(beta->shape()));
  }
  const auto xv = x.data();
  std::vector<T> xhat(xv.size()), rstd(rows), out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * rstd[r];
      out[r * d + j] = gamma ? xhat[r * d + j] * gamma->data()[j] +
                                   beta->data()[j]
                             : xhat[r * d + j];
    }
  }
  std::vector<Tensor<T>> inputs{x};
  if (gamma) {
    inputs.push_back(*gamma);
    inputs.push_back(*beta);
  }
  const bool affine = gamma != nullptr;
  return Tensor<T>::make(
      x.shape(), std::move(out), "layer_norm", std::move(inputs),
      [d, rows, affine, xhat = std::move(xhat),
       rstd = std::move(rstd)](NodeT<T>& self) {
        NodeT<T>& X = *self.parents[0];
        const T* gam = affine ? self.parents[1]->data.data() : nullptr;
        const auto& g = self.grad;
        if (affine) {
          NodeT<T>& G = *self.parents[1];
          NodeT<T>& B = *self.parents[2];
          if (G.requires_grad) {
            auto& gg = G.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < d; ++j)
                gg[j] += g[r * d + j] * xhat[r * d + j];
          }
          if (B.requires_grad) {
            auto& gb = B.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
          }
        }
        if (!X.requires_grad) return;
        auto& gx = X.ensure_grad();
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = g[r * d + j] * (gam ? gam[j] : T(1));
            m1 += dxhat[j];
            m2 += dxhat[j] * xhat[r * d + j];
          }
          m1 /= static_cast<T>(d);
          m2 /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] +=
                rstd[r] * (dxhat[j] - m1 - xhat[r * d + j] * m2);
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta) {
  return layer_norm_impl(x, &gamma, &beta);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x) {
  return layer_norm_impl<T>(x, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Sequence ops

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(1) ||
      w.dim(2) % 2 == 0 || b.size() != w.dim(0)) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) +
                         ", weight " + shape_str(w.shape()) + ", bias " +
                         shape_str(b.shape()));
  }
  const std::size_t len = x.dim(0), cin = x.dim(1), cout = w.dim(0),
                    k = w.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const T* X = x.data().data();
  const T* W = w.data().data();
  const T* B = b.data().data();
  std::vector<T> out(len * cout);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t o = 0; o < cout; ++o) {
      T acc = B[o];
      for (std::size_t kk = 0; kk < k; ++kk) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(t + kk) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const T* xr = X + src * cin;
        const T* wr = W + o * cin * k + kk;
        for (std::size_t c = 0; c < cin; ++c) acc += wr[c * k] * xr[c];
      }
      out[t * cout + o] = acc;
    }
  }
  return Tensor<T>::make(
      {len, cout}, std::move(out), "conv1d", {x, w, b},
      [len, cin, cout, k, pad](NodeT<T>& self) {
        NodeT<T>& Xn = *self.parents[0];
        NodeT<T>& Wn = *self.parents[1];
        NodeT<T>& Bn = *self.parents[2];
        const auto& g = self.grad;
        if (Bn.requires_grad) {
          auto& gb = Bn.ensure_grad();
          for (std::size_t t = 0; t < len; ++t)
            for (std::size_t o = 0; o < cout; ++o) gb[o] += g[t * cout + o];
        }
        T* gx = Xn.requires_grad ? Xn.ensure_grad().data() : nullptr;
        T* gw = Wn.requires_grad ? Wn.ensure_grad().data() : nullptr;
        const T* X = Xn.data.data();
        const T* W = Wn.data.data();
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const std::ptrdiff_t src =
                static_cast<std::ptrdiff_t>(t + kk) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            for (std::size_t o = 0; o < cout; ++o) {
              const T go = g[t * cout + o];
              for (std::size_t c = 0; c < cin; ++c) {
                const std::size_t wi = o * cin * k + c * k + kk;
                if (gx) gx[src * cin + c] += go * W[wi];
                if (gw) gw[wi] += go * X[src * cin + c];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table,
                    std::span<const std::int32_t> ids) {
  if (table.rank() != 2) {
    throw DimensionError("embedding table must be rank 2, got " +
                         shape_str(table.shape()));
  }
  if (ids.empty()) throw ContractError("embedding: empty id list");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  const auto tv = table.data();
  std::vector<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ContractError("embedding: id " + std::to_string(ids[i]) +
                          " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return Tensor<T>::make({ids.size(), d}, std::move(out), "embedding",
                         {table}, [d, idv = std::move(idv)](NodeT<T>& self) {
                           auto& gt = self.parents[0]->ensure_grad();
                           for (std::size_t i = 0; i < idv.size(); ++i)
                             for (std::size_t j = 0; j < d; ++j)
                               gt[idv[i] * d + j] += self.grad[i * d + j];
                         });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ContractError("dropout rate must be in [0, 1), got " +
                        std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  if (!rng) throw ContractError("dropout in training mode needs an rng");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.size());
  for (auto& m : mask) m = rng->uniform() < p ? T(0) : keep_scale;
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return Tensor<T>::make(x.shape(), std::move(out), "dropout", {x},
                         [mask = std::move(mask)](NodeT<T>& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           for (std::size_t i = 0; i < gx.size(); ++i)
                             gx[i] += self.grad[i] * mask[i];
                         });
}

template <typename T>
Tensor<T> sinusoidal_encoding(std::span<const double> positions,
                              std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ContractError("sinusoidal_encoding needs an even dim, got " +
                        std::to_string(dim));
  }
  if (positions.empty()) throw ContractError("sinusoidal_encoding: no positions");
  const std::size_t half = dim / 2;
  std::vector<T> out(positions.size() * dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(dim));
      const double a = positions[r] * freq;
      out[r * dim + i] = static_cast<T>(std::sin(a));
      out[r * dim + half + i] = static_cast<T>(std::cos(a));
    }
  }
  return Tensor<T>::from({positions.size(), dim}, std::move(out));
}

// ---------------------------------------------------------------------------

#define MFTTS_INSTANTIATE(T)                                                  \
  template class Tensor<T>;                                                   \
  template void check_same_shape(const Tensor<T>&, const Tensor<T>&,         \
                                 const char*);                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(const Tensor<T>&, T);                              \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                         \
  template Tensor<T> gelu(const Tensor<T>&);                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                               \
  template Tensor<T> tanh(const Tensor<T>&);                                  \
  template Tensor<T> exp(const Tensor<T>&);                                   \
  template Tensor<T> log(const Tensor<T>&);                                   \
  template Tensor<T> sqrt(const Tensor<T>&);                                  \
  template Tensor<T> square(const Tensor<T>&);                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> transpose(const Tensor<T>&);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);      \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t,        \
                           std::size_t);                                      \
  template Tensor<T> sum(const Tensor<T>&);                                   \
  template Tensor<T> mean(const Tensor<T>&);                                  \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                  \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);              \
  template Tensor<T> masked_softmax(const Tensor<T>&,                         \
                                    std::span<const std::uint8_t>);           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,           \
                                const Tensor<T>&);                            \
  template Tensor<T> layer_norm(const Tensor<T>&);                            \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&,               \
                            const Tensor<T>&);                                \
  template Tensor<T> embedding(const Tensor<T>&,                              \
                               std::span<const std::int32_t>);                \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng*);           \
  template Tensor<T> sinusoidal_encoding<T>(std::span<const double>,          \
                                            std::size_t);

MFTTS_INSTANTIATE(float)
MFTTS_INSTANTIATE(double)

#undef MFTTS_INSTANTIATE

}  // namespace mftts
