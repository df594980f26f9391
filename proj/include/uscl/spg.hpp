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

// Sample pair generation.
//
// A positive pair comes from one video: three frames are drawn in
// chronological order, the middle one is the anchor, and each view is a
// Beta-weighted mixup of the anchor with one of the outer frames. Both views
// then go through independent random augmentation. A batch holds exactly one
// pair per video, so every cross-pair (negative) comparison is between
// different videos.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uscl/dataset.hpp"

namespace uscl {

using Rng = std::mt19937_64;

// Stream seed for one (seed, epoch, video) triple, so pairs can be built
// independently of each other and of the order they are built in.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::string_view video_id);

struct FrameTriplet {
  // Chronological: frames[1] is the anchor.
  std::array<Frame, 3> frames;
  std::array<std::size_t, 3> indices{};
  std::string video_id;
  std::optional<std::vector<double>> label;
};

struct SamplePair {
  Frame x1;
  Frame x2;
  std::optional<std::vector<double>> y;
  std::string video_id;
  double xi1 = 1.0;
  double xi2 = 1.0;
};

struct Batch {
  std::vector<SamplePair> pairs;
  std::size_t epoch = 0;
  std::size_t step = 0;

  std::size_t size() const noexcept { return pairs.size(); }
  std::size_t num_labeled() const;
};

struct AugmentConfig {
  // Crop area as a fraction of the source image, drawn uniformly.
  double crop_scale_min = 0.6;
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  // Degrees; the angle is drawn from U(-max_rotation, +max_rotation).
  double max_rotation = 10.0;
  // Additive brightness offset drawn from U(-brightness, +brightness).
  double brightness = 0.1;
  // Contrast factor drawn from U(1 - contrast, 1 + contrast).
  double contrast = 0.1;
  std::size_t output_size = 32;

  // No-op configuration for a square image of the given side.
  static AugmentConfig identity(std::size_t side);
};

void validate(const AugmentConfig& cfg);

struct PairConfig {
  AugmentConfig augment;
  double alpha = 0.5;
  double beta = 0.5;
  // Off: both views start from the anchor frame (no interpolation).
  bool mixup = true;
};

double sample_beta(double alpha, double beta, Rng& rng);

FrameTriplet sample_triplet(const FrameSet& fs, std::size_t num_classes, Rng& rng);

struct MixedPair {
  Frame x1;
  Frame x2;
  std::optional<std::vector<double>> y1;
  std::optional<std::vector<double>> y2;
  double xi1 = 1.0;
  double xi2 = 1.0;
};

// View 1 = xi1 * anchor + (1 - xi1) * first, view 2 = xi2 * anchor + (1 - xi2) * last.
MixedPair mix_pair(const FrameTriplet& t, double xi1, double xi2);
// Same with xi1, xi2 drawn independently from Beta(alpha, beta).
MixedPair mix_pair(const FrameTriplet& t, double alpha, double beta, Rng& rng);

// Augmentation building blocks.
Frame crop_resize(const Frame& img, std::size_t x0, std::size_t y0, std::size_t crop_w, std::size_t crop_h,
                  std::size_t out_w, std::size_t out_h);
Frame hflip(const Frame& img);
// Rotates about the image center by `degrees`; uncovered pixels become 0.
Frame rotate(const Frame& img, double degrees);
Frame adjust_brightness(const Frame& img, double delta);
Frame adjust_contrast(const Frame& img, double factor);

// Random crop + resize, flip, rotation, brightness/contrast jitter, in that
// order, then clamp to [0, 1].
Frame augment(const Frame& img, const AugmentConfig& cfg, Rng& rng);

SamplePair build_pair(const FrameSet& fs, std::size_t num_classes, const PairConfig& cfg, Rng& rng);

// N distinct videos drawn without replacement, one pair each. Pair k uses an
// rng stream derived from (seed, epoch, video id).
Batch build_batch(std::span<const FrameSet> sets, std::size_t n, std::size_t num_classes, const PairConfig& cfg,
                  Rng& rng);
Batch build_batch(const Dataset& ds, std::size_t n, const PairConfig& cfg, Rng& rng);

// Pairs for an explicit list of frame-set indices (used by the training loop
// once an epoch permutation is fixed).
Batch build_batch_for(std::span<const FrameSet> sets, std::span<const std::size_t> picks, std::size_t num_classes,
                      const PairConfig& cfg, std::uint64_t seed, std::size_t epoch);

// Per-frame instance pairing baseline: each slot draws one frame uniformly
// from the pool of all frames, so two slots may come from the same video.
// Without mixup both views augment that frame; with mixup the slot's video
// supplies a regular interpolated pair.
Batch build_frame_batch(std::span<const FrameSet> sets, std::size_t n, std::size_t num_classes,
                        const PairConfig& cfg, Rng& rng);

}  // namespace uscl
