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

// Dense row-major tensors with a reverse-mode gradient tape.
//
// Every op that sees an input with requires_grad() records its parents and a
// backward closure on the result node, so the tape is the DAG reachable from
// the loss. Dropping the loss (and every intermediate handle) frees the tape;
// the training loop builds a fresh one per step. Instantiated for float
// (training, inference) and double (gradient checks).

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mftts/random.hpp"

namespace mftts {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
  bool is_leaf() const { return !backward_fn; }
};

}  // namespace detail

// Gradient recording is on by default; a live NoGradGuard turns it off for
// the current thread (inference, finite-difference probes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// When on, every op result is scanned for NaN/Inf and a NumericError names
// the op. Off by default; the test binaries turn it on.
void set_check_finite(bool on);
bool check_finite_enabled();

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data,
                     bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const T> data() const;
  // Writable view for leaves only (parameter init, optimizer steps, loading).
  std::span<T> mutable_data();
  T item() const;
  T at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  // Fresh leaf sharing no tape with this tensor.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Reverse pass from a scalar. Leaf gradients accumulate across calls until
  // zero_grad(); intermediate gradients are recomputed each call.
  void backward() const;

  const char* op_name() const;

  // Tape internals; used by op implementations.
  static Tensor make(Shape shape, std::vector<T> data, const char* op,
                     std::vector<Tensor> inputs,
                     std::function<void(detail::Node<T>&)> backward_fn);
  detail::Node<T>& node() const { return *node_; }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> node)
      : node_(std::move(node)) {}

  std::shared_ptr<detail::Node<T>> node_;
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op);

// ---------------------------------------------------------------------------
// Elementwise. `b` broadcasts into `a`: equal shapes, a single element, the
// trailing dims of `a`, or `a`'s shape with some dims set to 1.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);

template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

// ---------------------------------------------------------------------------
// Linear algebra and shape.

// [m x k] . [k x n] -> [m x n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin,
                std::size_t end);

// ---------------------------------------------------------------------------
// Reductions. The *_axis forms keep the reduced axis with extent 1.

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis);
template <typename T> Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis);

// ---------------------------------------------------------------------------
// Normalization and attention helpers.

template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis);

// Row softmax of [m x n] where entries with keep[i*n+j] == 0 are treated as
// -inf (exactly zero weight). A row with nothing kept is a ContractError.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& x,
                         std::span<const std::uint8_t> keep);

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes over the last dim, then gamma * xhat + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta);
// Same without the affine part.
template <typename T> Tensor<T> layer_norm(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Sequence ops.

// x [T x Cin], w [Cout x Cin x K] (K odd), b [Cout]; stride 1, same padding.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// table [V x d] gathered by ids -> [n x d]. Any id >= V is a ContractError.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids);

// Inverted dropout: in training, zero with probability p and scale the rest
// by 1/(1-p). Outside training it returns `x` itself.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng);

// Rows of [sin(pos * f_i), cos(pos * f_i)] with f_i = 10000^(-2i/dim).
// Forward only; the result never requires grad.
template <typename T>
Tensor<T> sinusoidal_encoding(std::span<const double> positions,
                              std::size_t dim);

}  // namespace mftts
