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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "uscl/dataset.hpp"
#include "uscl/errors.hpp"
#include "uscl/spg.hpp"

namespace {

using uscl::Frame;
using uscl::FrameSet;
using uscl::FrameTriplet;
using uscl::Rng;

Frame random_frame(std::size_t w, std::size_t h, Rng& rng, std::size_t index = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f{w, h, std::vector<double>(w * h), index};
  for (auto& p : f.pixels) p = u(rng);
  return f;
}

FrameSet frame_set(const std::string& id, std::size_t k, Rng& rng, std::optional<std::size_t> label = {}) {
  FrameSet fs;
  fs.video_id = id;
  fs.label = label;
  for (std::size_t i = 0; i < k; ++i) fs.frames.push_back(random_frame(8, 8, rng, 3 * i));
  return fs;
}

FrameTriplet triplet_of(const Frame& a, const Frame& b, const Frame& c, std::optional<std::vector<double>> y = {}) {
  FrameTriplet t;
  t.frames = {a, b, c};
  t.indices = {0, 1, 2};
  t.video_id = "v";
  t.label = std::move(y);
  return t;
}

uscl::PairConfig identity_pairs(std::size_t side) {
  uscl::PairConfig cfg;
  cfg.augment = uscl::AugmentConfig::identity(side);
  return cfg;
}

TEST(SampleTriplet, KThreeTakesWholeSet) {
  Rng rng(1);
  const FrameSet fs = frame_set("v", 3, rng);
  const FrameTriplet t = uscl::sample_triplet(fs, 3, rng);
  EXPECT_EQ(t.indices, (std::array<std::size_t, 3>{0, 3, 6}));
  EXPECT_EQ(t.frames[1].pixels, fs.frames[1].pixels);
}

TEST(SampleTriplet, EveryFrameCanBeAnchorAndOrderHolds) {
  Rng rng(2);
  const FrameSet fs = frame_set("v", 9, rng);
  std::vector<int> anchor_counts(9, 0);
  for (int i = 0; i < 10000; ++i) {
    const FrameTriplet t = uscl::sample_triplet(fs, 3, rng);
    ASSERT_LT(t.indices[0], t.indices[1]);
    ASSERT_LT(t.indices[1], t.indices[2]);
    ++anchor_counts[t.indices[1] / 3];
  }
  // Only interior frames can sit in the middle of a sorted triplet.
  EXPECT_EQ(anchor_counts.front(), 0);
  EXPECT_EQ(anchor_counts.back(), 0);
  for (std::size_t k = 1; k + 1 < 9; ++k) EXPECT_GT(anchor_counts[k], 0) << k;
}

TEST(SampleTriplet, SameSeedSameTriplet) {
  Rng data(3);
  const FrameSet fs = frame_set("v", 12, data);
  Rng a(99), b(99);
  EXPECT_EQ(uscl::sample_triplet(fs, 3, a).indices, uscl::sample_triplet(fs, 3, b).indices);
}

TEST(SampleTriplet, TooShortSetIsRejected) {
  Rng rng(4);
  const FrameSet fs = frame_set("v", 2, rng);
  EXPECT_THROW(uscl::sample_triplet(fs, 3, rng), uscl::TooShortError);
}

TEST(MixPair, UnitCoefficientsReturnAnchor) {
  Rng rng(5);
  const auto t = triplet_of(random_frame(6, 6, rng), random_frame(6, 6, rng), random_frame(6, 6, rng));
  const auto m = uscl::mix_pair(t, 1.0, 1.0);
  EXPECT_EQ(m.x1.pixels, t.frames[1].pixels);
  EXPECT_EQ(m.x2.pixels, t.frames[1].pixels);
}

TEST(MixPair, HalfIsPixelwiseAverage) {
  Rng rng(6);
  const auto t = triplet_of(random_frame(6, 6, rng), random_frame(6, 6, rng), random_frame(6, 6, rng));
  const auto m = uscl::mix_pair(t, 0.5, 0.5);
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_NEAR(m.x1.pixels[i], (t.frames[0].pixels[i] + t.frames[1].pixels[i]) / 2.0, 1e-15);
    EXPECT_NEAR(m.x2.pixels[i], (t.frames[1].pixels[i] + t.frames[2].pixels[i]) / 2.0, 1e-15);
  }
}

TEST(MixPair, ConvexityAndSameLabelProperty) {
  Rng rng(7);
  const std::vector<double> y{0.0, 0.0, 1.0, 0.0};
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = triplet_of(random_frame(5, 4, rng), random_frame(5, 4, rng), random_frame(5, 4, rng), y);
    const auto m = uscl::mix_pair(t, 0.5, 0.5, rng);
    ASSERT_GE(m.xi1, 0.0);
    ASSERT_LE(m.xi1, 1.0);
    ASSERT_GE(m.xi2, 0.0);
    ASSERT_LE(m.xi2, 1.0);
    for (std::size_t i = 0; i < 20; ++i) {
      const double a = t.frames[0].pixels[i], b = t.frames[1].pixels[i], c = t.frames[2].pixels[i];
      EXPECT_GE(m.x1.pixels[i], std::min(a, b) - 1e-15);
      EXPECT_LE(m.x1.pixels[i], std::max(a, b) + 1e-15);
      EXPECT_GE(m.x2.pixels[i], std::min(b, c) - 1e-15);
      EXPECT_LE(m.x2.pixels[i], std::max(b, c) + 1e-15);
    }
    ASSERT_TRUE(m.y1 && m.y2);
    EXPECT_EQ(*m.y1, y);
    EXPECT_EQ(*m.y2, y);
  }
}

TEST(MixPair, DimensionMismatchIsContractError) {
  Rng rng(8);
  const auto t = triplet_of(random_frame(6, 6, rng), random_frame(6, 5, rng), random_frame(6, 6, rng));
  EXPECT_THROW(uscl::mix_pair(t, 0.5, 0.5), uscl::ContractError);
}

TEST(SampleBeta, HalfHalfMeanAndUShape) {
  Rng rng(9);
  constexpr int kDraws = 100000;
  double sum = 0.0;
  int low = 0, mid = 0, high = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double x = uscl::sample_beta(0.5, 0.5, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
    sum += x;
    if (x < 0.1) ++low;
    else if (x >= 0.45 && x < 0.55) ++mid;
    else if (x >= 0.9) ++high;
  }
  EXPECT_NEAR(sum / kDraws, 0.5, 0.01);
  EXPECT_GT(low, mid);
  EXPECT_GT(high, mid);
}

TEST(Augment, IdentityConfigIsNoOp) {
  Rng rng(10);
  const Frame f = random_frame(8, 8, rng);
  const Frame g = uscl::augment(f, uscl::AugmentConfig::identity(8), rng);
  ASSERT_EQ(g.pixels.size(), f.pixels.size());
  for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_NEAR(g.pixels[i], f.pixels[i], 1e-12);
}

TEST(Augment, FlipIsInvolution) {
  Rng rng(11);
  const Frame f = random_frame(7, 5, rng);
  EXPECT_EQ(uscl::hflip(uscl::hflip(f)).pixels, f.pixels);
  const Frame g = uscl::hflip(f);
  EXPECT_EQ(g.at(0, 2), f.at(6, 2));
}

TEST(Augment, BrightnessOnConstantImage) {
  for (double c : {0.0, 0.3, 0.95}) {
    for (double d : {-0.5, -0.1, 0.0, 0.2}) {
      const Frame f{4, 4, std::vector<double>(16, c), 0};
      const Frame g = uscl::adjust_brightness(f, d);
      for (double p : g.pixels) EXPECT_NEAR(p, std::clamp(c + d, 0.0, 1.0), 1e-15);
    }
  }
}

TEST(Augment, ContrastScalesAroundMean) {
  const Frame f{2, 1, {0.4, 0.6}, 0};
  const Frame g = uscl::adjust_contrast(f, 2.0);
  EXPECT_NEAR(g.pixels[0], 0.3, 1e-12);
  EXPECT_NEAR(g.pixels[1], 0.7, 1e-12);
}

TEST(Augment, FullCropResizeIsIdentity) {
  Rng rng(12);
  const Frame f = random_frame(9, 6, rng);
  const Frame g = uscl::crop_resize(f, 0, 0, 9, 6, 9, 6);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_NEAR(g.pixels[i], f.pixels[i], 1e-12);
}

TEST(Augment, ZeroRotationIsIdentityAndCornersFillWithZero) {
  Rng rng(13);
  const Frame f = random_frame(9, 9, rng);
  const Frame same = uscl::rotate(f, 0.0);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_NEAR(same.pixels[i], f.pixels[i], 1e-12);
  const Frame ones{9, 9, std::vector<double>(81, 1.0), 0};
  const Frame r = uscl::rotate(ones, 45.0);
  EXPECT_EQ(r.at(0, 0), 0.0);
  EXPECT_NEAR(r.at(4, 4), 1.0, 1e-12);
}

TEST(Augment, RandomOutputsStayInRangeAndSize) {
  Rng rng(14);
  uscl::AugmentConfig cfg;
  cfg.output_size = 24;
  for (int t = 0; t < 200; ++t) {
    const Frame g = uscl::augment(random_frame(32, 32, rng), cfg, rng);
    ASSERT_EQ(g.width, 24u);
    ASSERT_EQ(g.height, 24u);
    for (double p : g.pixels) {
      ASSERT_GE(p, 0.0);
      ASSERT_LE(p, 1.0);
    }
  }
}

TEST(Augment, OutputLargerThanInputIsContractError) {
  Rng rng(15);
  uscl::AugmentConfig cfg;
  cfg.output_size = 40;
  EXPECT_THROW(uscl::augment(random_frame(32, 32, rng), cfg, rng), uscl::ContractError);
}

TEST(BuildPair, IdentityAugmentationAndUnitMixGiveEqualViews) {
  Rng data(16);
  const FrameSet fs = frame_set("v", 6, data, 1);
  uscl::PairConfig cfg = identity_pairs(8);
  cfg.mixup = false;
  Rng rng(3);
  const auto p = uscl::build_pair(fs, 3, cfg, rng);
  EXPECT_EQ(p.x1.pixels, p.x2.pixels);
  EXPECT_EQ(p.video_id, "v");
}

TEST(BuildPair, LabeledVideoCarriesOneHot) {
  Rng data(17);
  const FrameSet fs = frame_set("v", 6, data, 2);
  Rng rng(4);
  const auto p = uscl::build_pair(fs, 3, identity_pairs(8), rng);
  ASSERT_TRUE(p.y.has_value());
  EXPECT_EQ(*p.y, (std::vector<double>{0, 0, 1}));
}

TEST(BuildPair, UnlabeledVideoHasNoLabel) {
  Rng data(18);
  const FrameSet fs = frame_set("v", 6, data);
  Rng rng(5);
  const auto p = uscl::build_pair(fs, 3, identity_pairs(8), rng);
  EXPECT_FALSE(p.y.has_value());
  EXPECT_EQ(p.x1.pixels.size(), 64u);
}

std::vector<FrameSet> pool(std::size_t videos, Rng& rng) {
  std::vector<FrameSet> out;
  for (std::size_t v = 0; v < videos; ++v) out.push_back(frame_set("v" + std::to_string(v), 5, rng, v % 3));
  return out;
}

TEST(BuildBatch, ThousandBatchesHaveDistinctVideos) {
  Rng rng(19);
  const auto sets = pool(12, rng);
  const auto cfg = identity_pairs(8);
  for (int b = 0; b < 1000; ++b) {
    const auto batch = uscl::build_batch(sets, 8, 3, cfg, rng);
    ASSERT_EQ(batch.size(), 8u);
    std::set<std::string> ids;
    for (const auto& p : batch.pairs) ids.insert(p.video_id);
    ASSERT_EQ(ids.size(), 8u);
  }
}

TEST(BuildBatch, FullDrawUsesEveryVideoOnce) {
  Rng rng(20);
  const auto sets = pool(7, rng);
  const auto batch = uscl::build_batch(sets, 7, 3, identity_pairs(8), rng);
  std::multiset<std::string> ids;
  for (const auto& p : batch.pairs) ids.insert(p.video_id);
  for (const auto& s : sets) EXPECT_EQ(ids.count(s.video_id), 1u);
}

TEST(BuildBatch, SingleAndOversizedBatches) {
  Rng rng(21);
  const auto sets = pool(4, rng);
  EXPECT_EQ(uscl::build_batch(sets, 1, 3, identity_pairs(8), rng).size(), 1u);
  EXPECT_THROW(uscl::build_batch(sets, 5, 3, identity_pairs(8), rng), uscl::ContractError);
}

TEST(BuildBatch, PairsDependOnlyOnSeedEpochAndVideo) {
  Rng rng(22);
  const auto sets = pool(6, rng);
  uscl::PairConfig cfg;
  cfg.augment.output_size = 8;
  cfg.augment.crop_scale_min = 0.8;
  const std::vector<std::size_t> forward{0, 1, 2, 3}, backward{3, 2, 1, 0};
  const auto a = uscl::build_batch_for(sets, forward, 3, cfg, 77, 2);
  const auto b = uscl::build_batch_for(sets, backward, 3, cfg, 77, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.pairs[i].video_id, b.pairs[3 - i].video_id);
    EXPECT_EQ(a.pairs[i].x1.pixels, b.pairs[3 - i].x1.pixels);
    EXPECT_EQ(a.pairs[i].x2.pixels, b.pairs[3 - i].x2.pixels);
  }
  const auto c = uscl::build_batch_for(sets, forward, 3, cfg, 77, 3);
  EXPECT_NE(a.pairs[0].x1.pixels, c.pairs[0].x1.pixels);
  EXPECT_NE(uscl::derive_seed(1, 0, "a"), uscl::derive_seed(1, 0, "b"));
  EXPECT_NE(uscl::derive_seed(1, 0, "a"), uscl::derive_seed(1, 1, "a"));
  EXPECT_EQ(uscl::derive_seed(5, 4, "x"), uscl::derive_seed(5, 4, "x"));
}

TEST(BuildFrameBatch, CanRepeatVideos) {
  Rng rng(23);
  const auto sets = pool(3, rng);
  uscl::PairConfig cfg = identity_pairs(8);
  cfg.mixup = false;
  bool repeated = false;
  for (int b = 0; b < 50 && !repeated; ++b) {
    const auto batch = uscl::build_frame_batch(sets, 3, 3, cfg, rng);
    std::set<std::string> ids;
    for (const auto& p : batch.pairs) {
      ids.insert(p.video_id);
      EXPECT_EQ(p.x1.pixels, p.x2.pixels);
    }
    repeated = ids.size() < batch.size();
  }
  EXPECT_TRUE(repeated);
}

}  // namespace
