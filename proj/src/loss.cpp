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

#include "uscl/loss.hpp"

#include <algorithm>
#include <cmath>

#include "uscl/errors.hpp"

namespace uscl {

using nd::Graph;
using nd::Tensor;
using nd::Var;

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim: vectors of length " + std::to_string(a.size()) +
                                             " and " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_sim: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double pair_term(const Tensor& z, std::size_t i, std::size_t j, double tau) {
  if (z.rank() != 2) throw ShapeError("pair_term: expected a matrix, got " + nd::shape_str(z.shape()));
  const std::size_t rows = z.dim(0), d = z.dim(1);
  if (i >= rows || j >= rows || i == j) throw ContractError("pair_term: need distinct row indices in range");
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  auto row = [&](std::size_t r) { return z.values().subspan(r * d, d); };
  double denom = 0.0, numer = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (k == i) continue;
    const double e = std::exp(cosine_sim(row(i), row(k)) / tau);
    denom += e;
    if (k == j) numer = e;
  }
  return std::log(denom) - std::log(numer);
}

Var similarity_matrix(Graph& g, Var z) {
  const nd::Shape shape = g.value(z).shape();
  if (shape.size() != 2) throw ShapeError("similarity_matrix: expected [2N, D], got " + nd::shape_str(shape));
  Var unit = g.l2_normalize(z, 1);
  return g.matmul(unit, g.transpose(unit));
}

Var contrastive_from_similarity(Graph& g, Var s, double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  const nd::Shape shape = g.value(s).shape();
  if (shape.size() != 2 || shape[0] != shape[1]) {
    throw ShapeError("contrastive loss: similarity matrix must be square, got " + nd::shape_str(shape));
  }
  const std::size_t m = shape[0];
  if (m < 2 || m % 2 != 0) {
    throw ContractError("contrastive loss needs an even number (>= 2) of rows, got " + std::to_string(m));
  }

  Tensor off_diag = Tensor::filled({m, m}, 1.0);
  Tensor partner = Tensor::zeros({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    off_diag[i * m + i] = 0.0;
    partner[i * m + (i ^ 1)] = 1.0;
  }

  Var e = g.exp(g.mul_scalar(s, 1.0 / tau));
  Var denom = g.sum(g.mul(e, g.constant(std::move(off_diag))), 1);
  Var numer = g.sum(g.mul(e, g.constant(std::move(partner))), 1);
  // log(denom) - log(numer): exactly zero when the partner is the only term.
  Var terms = g.add(g.log(denom), g.mul_scalar(g.log(numer), -1.0));
  return g.mean(terms, 0);
}

Var contrastive_loss(Graph& g, Var z, double tau) {
  return contrastive_from_similarity(g, similarity_matrix(g, z), tau);
}

SupervisedTerm supervised_loss(Graph& g, Var probs, const PairLabels& labels) {
  const nd::Shape shape = g.value(probs).shape();
  if (shape.size() != 2 || shape[0] != 2 * labels.size()) {
    throw ShapeError("supervised loss: probabilities " + nd::shape_str(shape) + " do not match " +
                     std::to_string(labels.size()) + " pairs");
  }
  const std::size_t rows = shape[0], classes = shape[1];
  Tensor targets = Tensor::zeros({rows, classes});
  std::size_t n_labeled = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    const auto& y = *labels[i];
    if (y.size() != classes) {
      throw ShapeError("supervised loss: label of pair " + std::to_string(i) + " has length " +
                       std::to_string(y.size()) + ", expected " + std::to_string(classes));
    }
    for (std::size_t c = 0; c < classes; ++c) {
      targets[(2 * i) * classes + c] = y[c];
      targets[(2 * i + 1) * classes + c] = y[c];
    }
    ++n_labeled;
  }
  if (n_labeled == 0) return {std::nullopt, 0};
  Var log_p = g.log(g.clamp_min(probs, kProbFloor));
  Var ce_sum = g.sum_all(g.mul(log_p, g.constant(std::move(targets))));
  return {g.mul_scalar(ce_sum, -1.0 / (2.0 * static_cast<double>(n_labeled))), n_labeled};
}

TotalLoss total_loss(Graph& g, Var z, Var probs, const PairLabels& labels, double tau, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (g.value(z).shape().at(0) != g.value(probs).shape().at(0)) {
    throw ShapeError("total loss: Z and O row counts differ: " + nd::shape_str(g.value(z).shape()) + " and " +
                     nd::shape_str(g.value(probs).shape()));
  }
  TotalLoss out;
  out.l_con = contrastive_loss(g, z, tau);
  const auto sup = supervised_loss(g, probs, labels);
  out.l_sup = sup.loss;
  out.total = sup.loss ? g.add(out.l_con, g.mul_scalar(*sup.loss, lambda)) : out.l_con;

  out.breakdown.l_con = g.value(out.l_con).item();
  out.breakdown.l_sup = sup.loss ? g.value(*sup.loss).item() : 0.0;
  out.breakdown.lambda = lambda;
  out.breakdown.total = g.value(out.total).item();
  out.breakdown.n_labeled = sup.n_labeled;
  return out;
}

double contrastive_loss(const Tensor& z, double tau) {
  Graph g;
  return g.value(contrastive_loss(g, g.input(z), tau)).item();
}

double contrastive_loss_from_similarity(const Tensor& s, double tau) {
  Graph g;
  return g.value(contrastive_from_similarity(g, g.input(s), tau)).item();
}

std::pair<double, std::size_t> supervised_loss(const Tensor& probs, const PairLabels& labels) {
  Graph g;
  const auto term = supervised_loss(g, g.input(probs), labels);
  return {term.loss ? g.value(*term.loss).item() : 0.0, term.n_labeled};
}

LossBreakdown total_loss(const Tensor& z, const Tensor& probs, const PairLabels& labels, double tau, double lambda) {
  Graph g;
  return total_loss(g, g.input(z), g.input(probs), labels, tau, lambda).breakdown;
}

}  // namespace uscl
