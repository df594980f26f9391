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

// Fixed synthetic ablation benchmark: pretrain each ingredient combination on
// one synthetic dataset, then linear-probe the frozen encoders on a separate
// downstream set of held-out videos.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uscl/dataset.hpp"
#include "uscl/train.hpp"

namespace uscl {

struct AblationBenchmark {
  SyntheticConfig data;
  std::uint64_t data_seed = 7;
  double labeled_fraction = 1.0;
  TrainConfig train;
  // Downstream set: drawn from the same generator with its own seed, then
  // truncated to `downstream_videos` (classes kept as balanced as possible).
  std::size_t downstream_videos = 20;
  std::uint64_t downstream_seed = 1007;
  std::size_t probe_folds = 5;
  AdaptConfig probe;

  // 3 classes x 20 videos x 20 frames of 32x32, 50 epochs, N = 8, seed 7.
  // Faint class gratings under per-video and per-frame blob clutter, so the
  // class is not linearly readable from a random encoder.
  static AblationBenchmark desk();
};

struct AblationRow {
  std::string name;
  Ablation ablation;
  Evaluation probe;
  Cohesion cohesion;
  double final_l_con = 0.0;
  double seconds = 0.0;
};

Dataset downstream_dataset(const AblationBenchmark& bench);

// Linear-probe metrics for one pretraining variant.
AblationRow run_variant(const AblationBenchmark& bench, const Ablation& ablation, const std::string& name);

// vanilla, +I1, +I1+I2, +I1+I2+CE in that order.
std::vector<AblationRow> run_ablation(const AblationBenchmark& bench);

// Same probe for a randomly initialized encoder.
AblationRow run_random_init(const AblationBenchmark& bench);

}  // namespace uscl
