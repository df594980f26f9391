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

#include "uscl/ndmath.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "uscl/errors.hpp"

namespace uscl::nd {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
  if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != values_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " holds " + std::to_string(shape_numel(shape_)) +
                     " values, got " + std::to_string(values_.size()));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
  if (values_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
  return values_[0];
}

std::span<const double> Tensor::grad() const noexcept {
  if (!grad_) return {};
  return *grad_;
}

std::span<double> Tensor::mutable_grad() {
  if (!grad_) grad_.emplace(values_.size(), 0.0);
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

// ---------------------------------------------------------------------------
// Graph

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kMulScalar: return "mul_scalar";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kClampMin: return "clamp_min";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kConv2dValid: return "conv2d_valid";
    case OpKind::kMaxPool2d: return "max_pool2d";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConcat: return "concat";
    case OpKind::kTranspose: return "transpose";
  }
  return "?";
}

namespace {

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, OpKind kind) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op_name(kind)) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

[[noreturn]] void shape_mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void expect_arity(OpKind kind, std::span<const Var> inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw ContractError(std::string(op_name(kind)) + " expects " + std::to_string(n) + " inputs, got " +
                        std::to_string(inputs.size()));
  }
}

void expect_rank(OpKind kind, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op_name(kind)) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(s));
  }
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

}  // namespace

const Tensor& Graph::val(std::size_t id) const {
  const auto& node = nodes_[id];
  return node.external ? *node.external : node.value;
}

const Tensor& Graph::value(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("unknown graph variable");
  return val(v.id);
}

Var Graph::push(Node node) {
  if (node.kind != OpKind::kLeaf) {
    for (double x : node.value.values()) {
      if (!std::isfinite(x)) {
        throw DomainError(std::string(op_name(node.kind)) + ": non-finite output");
      }
    }
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::leaf(Tensor& tensor) {
  const bool grad = tensor.requires_grad();
  Node n{OpKind::kLeaf, {}, {}, {}, &tensor, grad ? &tensor : nullptr, grad, {}};
  return push(std::move(n));
}

Var Graph::input(const Tensor& tensor) {
  Node n{OpKind::kLeaf, {}, {}, {}, &tensor, nullptr, false, {}};
  return push(std::move(n));
}

Var Graph::constant(Tensor tensor) {
  Node n{OpKind::kConstant, {}, std::move(tensor), {}, nullptr, nullptr, false, {}};
  return push(std::move(n));
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  for (auto v : inputs) {
    if (v.id >= nodes_.size()) throw ContractError("unknown graph variable");
  }
  Node node{kind, {}, {}, attrs, nullptr, nullptr, false, {}};
  for (auto v : inputs) {
    node.inputs.push_back(v.id);
    node.needs_grad = node.needs_grad || nodes_[v.id].needs_grad;
  }

  switch (kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      throw ContractError("leaf/constant nodes are created with leaf() / constant()");

    case OpKind::kMatMul: {
      expect_arity(kind, inputs, 2);
      const auto& a = val(inputs[0].id);
      const auto& b = val(inputs[1].id);
      expect_rank(kind, a.shape(), 2);
      expect_rank(kind, b.shape(), 2);
      if (a.dim(1) != b.dim(0)) shape_mismatch(kind, a.shape(), b.shape());
      const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
      std::vector<double> out(m * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a[i * k + p];
          if (av == 0.0) continue;
          const double* brow = &b.values()[p * n];
          double* orow = &out[i * n];
          for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      }
      node.value = Tensor({m, n}, std::move(out));
      break;
    }

    case OpKind::kAdd: {
      expect_arity(kind, inputs, 2);
      const auto& a = val(inputs[0].id);
      const auto& b = val(inputs[1].id);
      if (!is_suffix(a.shape(), b.shape())) shape_mismatch(kind, a.shape(), b.shape());
      const std::size_t bn = b.numel();
      std::vector<double> out(a.data());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % bn];
      node.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case OpKind::kMul: {
      expect_arity(kind, inputs, 2);
      const auto& a = val(inputs[0].id);
      const auto& b = val(inputs[1].id);
      if (a.shape() != b.shape()) shape_mismatch(kind, a.shape(), b.shape());
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
      node.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case OpKind::kMulScalar:
    case OpKind::kRelu:
    case OpKind::kExp:
    case OpKind::kLog:
    case OpKind::kClampMin: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a[i];
        switch (kind) {
          case OpKind::kMulScalar: out[i] = attrs.scalar * x; break;
          case OpKind::kRelu: out[i] = x > 0.0 ? x : 0.0; break;
          case OpKind::kExp: out[i] = std::exp(x); break;
          case OpKind::kLog:
            if (!(x > 0.0)) {
              throw DomainError("log: non-positive input " + std::to_string(x) + " at index " + std::to_string(i));
            }
            out[i] = std::log(x);
            break;
          default: out[i] = std::max(x, attrs.scalar); break;
        }
      }
      node.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case OpKind::kSum:
    case OpKind::kMean: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      const auto s = split_at(a.shape(), attrs.axis, kind);
      std::vector<double> out(s.outer * s.inner, 0.0);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.n; ++j) {
          const double* src = &a.values()[(o * s.n + j) * s.inner];
          double* dst = &out[o * s.inner];
          for (std::size_t q = 0; q < s.inner; ++q) dst[q] += src[q];
        }
      }
      if (kind == OpKind::kMean) {
        for (auto& v : out) v /= static_cast<double>(s.n);
      }
      node.value = Tensor(drop_axis(a.shape(), attrs.axis), std::move(out));
      break;
    }

    case OpKind::kSumAll: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      double total = 0.0;
      for (double x : a.values()) total += x;
      node.value = Tensor::scalar(total);
      break;
    }

    case OpKind::kL2Normalize:
    case OpKind::kSoftmax: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      const auto s = split_at(a.shape(), attrs.axis, kind);
      std::vector<double> out(a.numel());
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t q = 0; q < s.inner; ++q) {
          const std::size_t base = o * s.n * s.inner + q;
          auto at = [&](std::size_t j) { return base + j * s.inner; };
          if (kind == OpKind::kL2Normalize) {
            double sq = 0.0;
            for (std::size_t j = 0; j < s.n; ++j) sq += a[at(j)] * a[at(j)];
            const double norm = std::sqrt(sq);
            if (norm == 0.0) throw DomainError("l2_normalize: zero vector");
            for (std::size_t j = 0; j < s.n; ++j) out[at(j)] = a[at(j)] / norm;
          } else {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, a[at(j)]);
            double z = 0.0;
            for (std::size_t j = 0; j < s.n; ++j) {
              out[at(j)] = std::exp(a[at(j)] - mx);
              z += out[at(j)];
            }
            for (std::size_t j = 0; j < s.n; ++j) out[at(j)] /= z;
          }
        }
      }
      node.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case OpKind::kConv2dValid: {
      expect_arity(kind, inputs, 3);
      const auto& x = val(inputs[0].id);
      const auto& w = val(inputs[1].id);
      const auto& b = val(inputs[2].id);
      expect_rank(kind, x.shape(), 4);
      expect_rank(kind, w.shape(), 4);
      const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
      const std::size_t Co = w.dim(0), K = w.dim(2);
      const std::size_t st = attrs.stride;
      if (st == 0) throw ContractError("conv2d_valid: stride must be positive");
      if (w.dim(1) != Ci || w.dim(3) != K || K > H || K > W) shape_mismatch(kind, x.shape(), w.shape());
      if (b.shape() != Shape{Co}) shape_mismatch(kind, w.shape(), b.shape());
      const std::size_t Ho = (H - K) / st + 1, Wo = (W - K) / st + 1;
      std::vector<double> out(B * Co * Ho * Wo);
      for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t co = 0; co < Co; ++co) {
          double* plane = &out[((n * Co) + co) * Ho * Wo];
          std::fill(plane, plane + Ho * Wo, b[co]);
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const double* xin = &x.values()[((n * Ci) + ci) * H * W];
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const double wv = w[((co * Ci + ci) * K + ky) * K + kx];
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  const double* xrow = xin + (oy * st + ky) * W + kx;
                  double* orow = plane + oy * Wo;
                  for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += wv * xrow[ox * st];
                }
              }
            }
          }
        }
      }
      node.value = Tensor({B, Co, Ho, Wo}, std::move(out));
      break;
    }

    case OpKind::kMaxPool2d: {
      expect_arity(kind, inputs, 1);
      const auto& x = val(inputs[0].id);
      expect_rank(kind, x.shape(), 4);
      const std::size_t P = attrs.pool;
      const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
      if (P == 0 || P > H || P > W) {
        throw ShapeError("max_pool2d: window " + std::to_string(P) + " does not fit shape " + shape_str(x.shape()));
      }
      const std::size_t Ho = H / P, Wo = W / P;
      std::vector<double> out(B * C * Ho * Wo);
      node.argmax.resize(out.size());
      for (std::size_t plane = 0; plane < B * C; ++plane) {
        const std::size_t in_base = plane * H * W;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            std::size_t best = in_base + (oy * P) * W + ox * P;
            for (std::size_t dy = 0; dy < P; ++dy) {
              for (std::size_t dx = 0; dx < P; ++dx) {
                const std::size_t idx = in_base + (oy * P + dy) * W + ox * P + dx;
                if (x[idx] > x[best]) best = idx;
              }
            }
            const std::size_t o = (plane * Ho + oy) * Wo + ox;
            out[o] = x[best];
            node.argmax[o] = best;
          }
        }
      }
      node.value = Tensor({B, C, Ho, Wo}, std::move(out));
      break;
    }

    case OpKind::kReshape: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      if (shape_numel(attrs.shape) != a.numel()) shape_mismatch(kind, a.shape(), attrs.shape);
      node.value = Tensor(attrs.shape, a.data());
      break;
    }

    case OpKind::kConcat: {
      if (inputs.empty()) throw ContractError("concat: no inputs");
      const auto& first = val(inputs[0].id);
      Shape out_shape = first.shape();
      split_at(out_shape, attrs.axis, kind);
      out_shape[attrs.axis] = 0;
      for (auto v : inputs) {
        const auto& t = val(v.id);
        if (t.rank() != first.rank()) shape_mismatch(kind, first.shape(), t.shape());
        for (std::size_t d = 0; d < t.rank(); ++d) {
          if (d != attrs.axis && t.dim(d) != first.dim(d)) shape_mismatch(kind, first.shape(), t.shape());
        }
        out_shape[attrs.axis] += t.dim(attrs.axis);
      }
      const auto s = split_at(out_shape, attrs.axis, kind);
      std::vector<double> out(shape_numel(out_shape));
      std::size_t offset = 0;
      for (auto v : inputs) {
        const auto& t = val(v.id);
        const std::size_t chunk = t.dim(attrs.axis) * s.inner;
        for (std::size_t o = 0; o < s.outer; ++o) {
          std::copy_n(&t.values()[o * chunk], chunk, &out[o * s.n * s.inner + offset]);
        }
        offset += chunk;
      }
      node.value = Tensor(out_shape, std::move(out));
      break;
    }

    case OpKind::kTranspose: {
      expect_arity(kind, inputs, 1);
      const auto& a = val(inputs[0].id);
      expect_rank(kind, a.shape(), 2);
      const std::size_t m = a.dim(0), n = a.dim(1);
      std::vector<double> out(m * n);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
      }
      node.value = Tensor({n, m}, std::move(out));
      break;
    }
  }
  return push(std::move(node));
}

Var Graph::matmul(Var a, Var b) { return apply(OpKind::kMatMul, std::array{a, b}); }
Var Graph::add(Var a, Var b) { return apply(OpKind::kAdd, std::array{a, b}); }
Var Graph::mul(Var a, Var b) { return apply(OpKind::kMul, std::array{a, b}); }

Var Graph::mul_scalar(Var a, double c) {
  OpAttrs at;
  at.scalar = c;
  return apply(OpKind::kMulScalar, std::array{a}, at);
}

Var Graph::relu(Var a) { return apply(OpKind::kRelu, std::array{a}); }
Var Graph::exp(Var a) { return apply(OpKind::kExp, std::array{a}); }
Var Graph::log(Var a) { return apply(OpKind::kLog, std::array{a}); }

Var Graph::clamp_min(Var a, double floor) {
  OpAttrs at;
  at.scalar = floor;
  return apply(OpKind::kClampMin, std::array{a}, at);
}

Var Graph::sum(Var a, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kSum, std::array{a}, at);
}

Var Graph::mean(Var a, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kMean, std::array{a}, at);
}

Var Graph::sum_all(Var a) { return apply(OpKind::kSumAll, std::array{a}); }

Var Graph::l2_normalize(Var a, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kL2Normalize, std::array{a}, at);
}

Var Graph::softmax(Var a, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kSoftmax, std::array{a}, at);
}

Var Graph::conv2d_valid(Var x, Var w, Var b, std::size_t stride) {
  OpAttrs at;
  at.stride = stride;
  return apply(OpKind::kConv2dValid, std::array{x, w, b}, at);
}

Var Graph::max_pool2d(Var x, std::size_t size) {
  OpAttrs at;
  at.pool = size;
  return apply(OpKind::kMaxPool2d, std::array{x}, at);
}

Var Graph::reshape(Var a, Shape shape) {
  OpAttrs at;
  at.shape = std::move(shape);
  return apply(OpKind::kReshape, std::array{a}, at);
}

Var Graph::concat(std::span<const Var> parts, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kConcat, parts, at);
}

Var Graph::transpose(Var a) { return apply(OpKind::kTranspose, std::array{a}); }

// ---------------------------------------------------------------------------
// Reverse pass

void Graph::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw ContractError("unknown graph variable");
  if (val(loss.id).numel() != 1) {
    throw ContractError("backward requires a single-element loss, got shape " + shape_str(val(loss.id).shape()));
  }
  std::vector<std::vector<double>> grads(nodes_.size());
  grads[loss.id] = {1.0};
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (grads[id].empty() || !nodes_[id].needs_grad) continue;
    backprop_node(id, grads);
    if (nodes_[id].kind != OpKind::kLeaf) grads[id].clear();
  }
}

void Graph::backprop_node(std::size_t id, std::vector<std::vector<double>>& grads) {
  Node& node = nodes_[id];
  const std::vector<double>& g = grads[id];
  const Tensor& out = val(id);

  // Returns the gradient buffer of input `slot`, or nullptr if that input
  // does not need one.
  auto gin = [&](std::size_t slot) -> double* {
    const std::size_t in = node.inputs[slot];
    if (!nodes_[in].needs_grad) return nullptr;
    if (grads[in].empty()) grads[in].assign(val(in).numel(), 0.0);
    return grads[in].data();
  };
  auto in_val = [&](std::size_t slot) -> const Tensor& { return val(node.inputs[slot]); };

  switch (node.kind) {
    case OpKind::kLeaf: {
      auto dst = node.grad_sink->mutable_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
      return;
    }
    case OpKind::kConstant:
      return;

    case OpKind::kMatMul: {
      const auto& a = in_val(0);
      const auto& b = in_val(1);
      const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (double* gb = gin(1)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
          }
        }
      }
      return;
    }

    case OpKind::kAdd: {
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (double* gb = gin(1)) {
        const std::size_t bn = in_val(1).numel();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i];
      }
      return;
    }

    case OpKind::kMul: {
      const auto& a = in_val(0);
      const auto& b = in_val(1);
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (double* gb = gin(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }

    case OpKind::kMulScalar: {
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.attrs.scalar * g[i];
      }
      return;
    }

    case OpKind::kRelu: {
      const auto& a = in_val(0);
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > 0.0) ga[i] += g[i];
        }
      }
      return;
    }

    case OpKind::kExp: {
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i];
      }
      return;
    }

    case OpKind::kLog: {
      const auto& a = in_val(0);
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
      }
      return;
    }

    case OpKind::kClampMin: {
      const auto& a = in_val(0);
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > node.attrs.scalar) ga[i] += g[i];
        }
      }
      return;
    }

    case OpKind::kSum:
    case OpKind::kMean: {
      const auto& a = in_val(0);
      const auto s = split_at(a.shape(), node.attrs.axis, node.kind);
      const double scale = node.kind == OpKind::kMean ? 1.0 / static_cast<double>(s.n) : 1.0;
      if (double* ga = gin(0)) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < s.n; ++j) {
            for (std::size_t q = 0; q < s.inner; ++q) {
              ga[(o * s.n + j) * s.inner + q] += scale * g[o * s.inner + q];
            }
          }
        }
      }
      return;
    }

    case OpKind::kSumAll: {
      if (double* ga = gin(0)) {
        const std::size_t n = in_val(0).numel();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
      }
      return;
    }

    case OpKind::kL2Normalize:
    case OpKind::kSoftmax: {
      const auto& a = in_val(0);
      double* ga = gin(0);
      if (!ga) return;
      const auto s = split_at(a.shape(), node.attrs.axis, node.kind);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t q = 0; q < s.inner; ++q) {
          const std::size_t base = o * s.n * s.inner + q;
          auto at = [&](std::size_t j) { return base + j * s.inner; };
          double dot = 0.0;
          for (std::size_t j = 0; j < s.n; ++j) dot += g[at(j)] * out[at(j)];
          if (node.kind == OpKind::kSoftmax) {
            for (std::size_t j = 0; j < s.n; ++j) ga[at(j)] += out[at(j)] * (g[at(j)] - dot);
          } else {
            double sq = 0.0;
            for (std::size_t j = 0; j < s.n; ++j) sq += a[at(j)] * a[at(j)];
            const double inv_norm = 1.0 / std::sqrt(sq);
            for (std::size_t j = 0; j < s.n; ++j) ga[at(j)] += (g[at(j)] - out[at(j)] * dot) * inv_norm;
          }
        }
      }
      return;
    }

    case OpKind::kConv2dValid: {
      const auto& x = in_val(0);
      const auto& w = in_val(1);
      const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
      const std::size_t Co = w.dim(0), K = w.dim(2), st = node.attrs.stride;
      const std::size_t Ho = out.dim(2), Wo = out.dim(3);
      double* gx = gin(0);
      double* gw = gin(1);
      double* gb = gin(2);
      for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t co = 0; co < Co; ++co) {
          const double* gplane = &g[((n * Co) + co) * Ho * Wo];
          if (gb) {
            double acc = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gplane[i];
            gb[co] += acc;
          }
          if (!gx && !gw) continue;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const std::size_t in_base = ((n * Ci) + ci) * H * W;
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const std::size_t widx = ((co * Ci + ci) * K + ky) * K + kx;
                const double wv = w[widx];
                double wacc = 0.0;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  const std::size_t row = in_base + (oy * st + ky) * W + kx;
                  const double* grow = gplane + oy * Wo;
                  if (gw) {
                    const double* xrow = &x.values()[row];
                    for (std::size_t ox = 0; ox < Wo; ++ox) wacc += grow[ox] * xrow[ox * st];
                  }
                  if (gx) {
                    double* gxrow = gx + row;
                    for (std::size_t ox = 0; ox < Wo; ++ox) gxrow[ox * st] += wv * grow[ox];
                  }
                }
                if (gw) gw[widx] += wacc;
              }
            }
          }
        }
      }
      return;
    }

    case OpKind::kMaxPool2d: {
      if (double* gx = gin(0)) {
        for (std::size_t o = 0; o < g.size(); ++o) gx[node.argmax[o]] += g[o];
      }
      return;
    }

    case OpKind::kReshape: {
      if (double* ga = gin(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      return;
    }

    case OpKind::kConcat: {
      const auto s = split_at(out.shape(), node.attrs.axis, node.kind);
      std::size_t offset = 0;
      for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
        const auto& t = in_val(slot);
        const std::size_t chunk = t.dim(node.attrs.axis) * s.inner;
        if (double* gt = gin(slot)) {
          for (std::size_t o = 0; o < s.outer; ++o) {
            const double* src = &g[o * s.n * s.inner + offset];
            for (std::size_t i = 0; i < chunk; ++i) gt[o * chunk + i] += src[i];
          }
        }
        offset += chunk;
      }
      return;
    }

    case OpKind::kTranspose: {
      if (double* ga = gin(0)) {
        const std::size_t m = in_val(0).dim(0), n = in_val(0).dim(1);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        }
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

namespace {

double rel_error(double analytic, double numeric) {
  if (std::isnan(analytic) || std::isnan(numeric)) return std::numeric_limits<double>::infinity();
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

double eval_forward(const MultiScalarFn& fn, std::vector<Tensor>& xs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(xs.size());
  for (auto& x : xs) vars.push_back(g.leaf(x));
  const Var out = fn(g, vars);
  return g.value(out).item();
}

}  // namespace

double grad_check(const ScalarFn& fn, const Tensor& x, double eps) {
  MultiScalarFn multi = [&fn](Graph& g, std::span<const Var> vars) { return fn(g, vars[0]); };
  GradCheckOptions opts;
  opts.eps = eps;
  return grad_check(multi, std::span<const Tensor>(&x, 1), opts);
}

double grad_check(const MultiScalarFn& fn, std::span<const Tensor> xs, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) throw ContractError("grad_check: eps must be positive");

  std::vector<Tensor> work;
  work.reserve(xs.size());
  for (const auto& x : xs) {
    work.emplace_back(x.shape(), x.data(), true);
  }

  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (auto& x : work) vars.push_back(g.leaf(x));
    const Var out = fn(g, vars);
    g.backward(out);
    for (auto& x : work) {
      const auto gr = x.grad();
      analytic.emplace_back(gr.begin(), gr.end());
      if (analytic.back().empty()) analytic.back().assign(x.numel(), 0.0);
      x.clear_grad();
      x.set_requires_grad(false);
    }
  }

  std::mt19937_64 rng(opts.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < work.size(); ++t) {
    std::vector<std::size_t> coords(work[t].numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_tensor > 0 && coords.size() > opts.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_tensor);
    }
    for (std::size_t i : coords) {
      const double orig = work[t][i];
      work[t][i] = orig + opts.eps;
      const double up = eval_forward(fn, work);
      work[t][i] = orig - opts.eps;
      const double down = eval_forward(fn, work);
      work[t][i] = orig;
      const double numeric = (up - down) / (2.0 * opts.eps);
      worst = std::max(worst, rel_error(analytic[t][i], numeric));
    }
  }
  return worst;
}

}  // namespace uscl::nd
