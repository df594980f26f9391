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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uscl/dataset.hpp"
#include "uscl/loss.hpp"
#include "uscl/model.hpp"
#include "uscl/spg.hpp"

namespace uscl {

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One Adam update. L2 weight decay is folded into the gradient
// (g += weight_decay * p) before the moment updates. Parameters without a
// gradient buffer are treated as having zero gradient. The state is sized on
// first use and must be reused with the same parameter list afterwards.
void adam_step(std::span<nd::Tensor* const> params, AdamState& state, double lr, double weight_decay);

// ---------------------------------------------------------------------------
// Pretraining

// Which pretraining ingredients are active.
struct Ablation {
  // One pair per video and batches of distinct videos. Off: per-frame
  // instances drawn from the pooled frames.
  bool pair_by_video = true;
  // Interpolated views. Off: both views start from one frame.
  bool mixup = true;
  // Supervised branch. Off: lambda is forced to 0.
  bool supervised = true;

  static Ablation vanilla() { return {false, false, false}; }
  static Ablation full() { return {true, true, true}; }
};

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  double lr = 3e-4;
  double weight_decay = 1e-4;
  double lambda = 0.2;
  double tau = 0.5;
  double alpha = 0.5;
  double beta = 0.5;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  // Validation loss every `eval_every` steps; 0 means once per epoch.
  std::size_t eval_every = 0;
  double val_fraction = 0.2;
  double samples_per_second = 3.0;
  Ablation ablation;
  // num_classes is taken from the dataset.
  ModelConfig model;
};

void validate(const TrainConfig& cfg);

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown loss;
  // L2 norm of the classifier gradient for this step.
  double classifier_grad_norm = 0.0;
};

struct EvalRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown val_loss;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  TrainConfig config;
  AdamState adam_constants;  // beta1/beta2/eps as used
  std::vector<std::string> train_videos;
  std::vector<std::string> val_videos;
  double wall_seconds = 0.0;
};

struct PretrainResult {
  // Backbone plus projection head and classifier. Only the backbone (f.*) is
  // meant for downstream use; g.* and h.* are pretraining-only.
  ModelParams params;
  RunRecord record;
};

// Model config used for a dataset: the backbone input follows the augment
// output size and the classifier follows the dataset's class count.
ModelConfig model_config_for(const Dataset& ds, const TrainConfig& cfg);

// Video-level split, stratified by label (unlabeled videos form their own
// stratum). Returns (train indices, val indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_videos(const Dataset& ds, double val_fraction,
                                                                           std::uint64_t seed);

PretrainResult pretrain(const Dataset& ds, const TrainConfig& cfg);

// Forward + loss for one batch. Gradients accumulate into `params` when
// `backward` is set.
LossBreakdown batch_loss(ModelParams& params, const Batch& batch, double tau, double lambda, bool backward);

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t count = 0;
};

Evaluation evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                    std::size_t num_classes);

struct Cohesion {
  double intra = 0.0;
  double inter = 0.0;
  double gap = 0.0;
  // Videos with a single embedding, left out of the within-video mean.
  std::vector<std::string> skipped;
};

// Mean pairwise cosine within videos, across videos, and their difference.
Cohesion cluster_cohesion(const nd::Tensor& embeddings, std::span<const std::string> video_ids);

// ---------------------------------------------------------------------------
// Downstream adaptation

enum class AdaptMode { kLinearProbe, kLastLayers };

const char* adapt_mode_name(AdaptMode mode);

struct AdaptConfig {
  std::size_t epochs = 200;
  double lr = 0.01;
  double weight_decay = 1e-4;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct AdaptResult {
  Evaluation metrics;
  std::vector<std::string> train_videos;
  std::vector<std::string> val_videos;
  // The adapted model (fresh classifier; for last-layers also a tuned f.fc).
  ModelParams params;
};

// Stratified 80/20 (per cfg.val_fraction) split by video, train a fresh
// classifier on frozen features (linear probe) or on frozen conv features
// with the final backbone fc (last layers), report image-level metrics on the
// held-out videos.
AdaptResult adapt(const ModelParams& pretrained, const Dataset& ds, AdaptMode mode, const AdaptConfig& cfg);

// Linear probe with k-fold cross-validation over videos: every video is
// predicted once by a probe trained on the other folds. Metrics pool all
// held-out frames.
Evaluation probe_cross_validated(const ModelParams& pretrained, const Dataset& ds, std::size_t folds,
                                 const AdaptConfig& cfg);

// All frames of a dataset resized to the backbone input, with their video ids.
struct FrameTable {
  std::vector<Frame> frames;
  std::vector<std::string> video_ids;
  std::vector<std::size_t> video_index;
};
FrameTable frame_table(const Dataset& ds, const ModelConfig& cfg);

}  // namespace uscl
