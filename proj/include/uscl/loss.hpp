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

// Training objective.
//
// Rows of Z (projections) and O (class probabilities) come in pair order:
// rows 2i and 2i+1 (0-based) are the two views of pair i.
//
//   s(i,k)   = cos(z_i, z_k)
//   l(i,j)   = -log( exp(s(i,j)/tau) / sum_{k != i} exp(s(i,k)/tau) )
//   L_con    = 1/(2N) sum_i [ l(2i, 2i+1) + l(2i+1, 2i) ]
//   L_sup    = mean over rows of labeled pairs of -sum_c y_c log o_c
//   L        = L_con + lambda * L_sup
//
// Unlabeled pairs only contribute to L_con.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "uscl/ndmath.hpp"

namespace uscl {

// Floor applied to probabilities before taking logs in the supervised term.
inline constexpr double kProbFloor = 1e-12;

struct LossBreakdown {
  double l_con = 0.0;
  double l_sup = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  std::size_t n_labeled = 0;
};

// Per-pair soft label, or nullopt for an unlabeled pair.
using PairLabels = std::vector<std::optional<std::vector<double>>>;

double cosine_sim(std::span<const double> a, std::span<const double> b);

// Value of l(i, j) for rows i != j of Z (0-based).
double pair_term(const nd::Tensor& z, std::size_t i, std::size_t j, double tau);

// Differentiable pieces.
// Cosine similarity matrix [2N, 2N] of the rows of Z.
nd::Var similarity_matrix(nd::Graph& g, nd::Var z);
// L_con from a precomputed similarity matrix.
nd::Var contrastive_from_similarity(nd::Graph& g, nd::Var s, double tau);
nd::Var contrastive_loss(nd::Graph& g, nd::Var z, double tau);

struct SupervisedTerm {
  // nullopt when no pair is labeled: the term is identically zero and has no
  // dependence on O.
  std::optional<nd::Var> loss;
  std::size_t n_labeled = 0;
};
SupervisedTerm supervised_loss(nd::Graph& g, nd::Var probs, const PairLabels& labels);

struct TotalLoss {
  nd::Var total;
  nd::Var l_con;
  std::optional<nd::Var> l_sup;
  LossBreakdown breakdown;
};
TotalLoss total_loss(nd::Graph& g, nd::Var z, nd::Var probs, const PairLabels& labels, double tau, double lambda);

// Value-only conveniences.
double contrastive_loss(const nd::Tensor& z, double tau);
double contrastive_loss_from_similarity(const nd::Tensor& s, double tau);
std::pair<double, std::size_t> supervised_loss(const nd::Tensor& probs, const PairLabels& labels);
LossBreakdown total_loss(const nd::Tensor& z, const nd::Tensor& probs, const PairLabels& labels, double tau,
                         double lambda);

}  // namespace uscl
