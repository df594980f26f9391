/**
 * Copyright 2026 The USCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small define-by-run reverse-mode differentiation engine over dense
// row-major float64 arrays.
//
// A Graph is built fresh for every evaluation. Parameters live outside the
// graph as Tensors and enter it through Graph::leaf(); backward() accumulates
// their gradients in place. Everything else (intermediate values and their
// gradients) is owned by the Graph and dies with it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uscl::nd {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  // Value of a single-element tensor.
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const noexcept;
  // Allocates a zero gradient buffer on first use.
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad() { grad_.reset(); }

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

enum class OpKind {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,
  kMul,
  kMulScalar,
  kRelu,
  kExp,
  kLog,
  kClampMin,
  kSum,
  kMean,
  kSumAll,
  kL2Normalize,
  kSoftmax,
  kConv2dValid,
  kMaxPool2d,
  kReshape,
  kConcat,
  kTranspose,
};

const char* op_name(OpKind kind);

struct OpAttrs {
  std::size_t axis = 0;
  double scalar = 0.0;
  std::size_t stride = 1;
  std::size_t pool = 2;
  Shape shape;
};

// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::size_t id = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Registers an external tensor. It must outlive the graph. If it
  // requires_grad, backward() accumulates into its grad buffer.
  Var leaf(Tensor& tensor);
  // Read-only external tensor; never receives gradients. Must outlive the graph.
  Var input(const Tensor& tensor);
  Var constant(Tensor tensor);

  // Generic dispatcher used by all the named builders below.
  Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

  // [m,k] x [k,n] -> [m,n]
  Var matmul(Var a, Var b);
  // b's shape equals a's shape or a trailing suffix of it; b is broadcast
  // over a's leading axes.
  Var add(Var a, Var b);
  // Elementwise product of equal shapes.
  Var mul(Var a, Var b);
  Var mul_scalar(Var a, double c);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var clamp_min(Var a, double floor);
  Var sum(Var a, std::size_t axis);
  Var mean(Var a, std::size_t axis);
  Var sum_all(Var a);
  Var l2_normalize(Var a, std::size_t axis);
  Var softmax(Var a, std::size_t axis);
  // x [B,Cin,H,W], w [Cout,Cin,k,k], b [Cout] -> [B,Cout,Ho,Wo], no padding.
  Var conv2d_valid(Var x, Var w, Var b, std::size_t stride = 1);
  // Non-overlapping window, trailing rows/cols that do not fill a window are dropped.
  Var max_pool2d(Var x, std::size_t size = 2);
  Var reshape(Var a, Shape shape);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var transpose(Var a);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse pass from a single-element loss. Leaf gradients accumulate.
  void backward(Var loss);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    OpAttrs attrs;
    const Tensor* external = nullptr;
    Tensor* grad_sink = nullptr;
    bool needs_grad = false;
    std::vector<std::size_t> argmax;  // max_pool2d routing
  };

  Var push(Node node);
  const Tensor& val(std::size_t id) const;
  void backprop_node(std::size_t id, std::vector<std::vector<double>>& grads);

  std::vector<Node> nodes_;
};

// Builds the scalar under test from a single input variable.
using ScalarFn = std::function<Var(Graph&, Var)>;
// Same, for several inputs at once.
using MultiScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every coordinate; otherwise at most this many random
  // coordinates per input tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

// Max over coordinates of |analytic - central difference| /
// max(1, |analytic|, |numeric|). NaN on either side yields +inf.
double grad_check(const ScalarFn& fn, const Tensor& x, double eps = 1e-5);
double grad_check(const MultiScalarFn& fn, std::span<const Tensor> xs,
                  const GradCheckOptions& opts = {});

}  // namespace uscl::nd
