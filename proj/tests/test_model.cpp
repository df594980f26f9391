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

#include <cmath>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <vector>

#include "uscl/errors.hpp"
#include "uscl/model.hpp"

namespace {

using uscl::Frame;
using uscl::ModelConfig;
using uscl::ModelParams;
using uscl::nd::Graph;
using uscl::nd::Tensor;
using uscl::nd::Var;

std::vector<Frame> random_frames(std::size_t n, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Frame> out;
  for (std::size_t i = 0; i < n; ++i) {
    Frame f{side, side, std::vector<double>(side * side), i};
    for (auto& p : f.pixels) p = u(rng);
    out.push_back(std::move(f));
  }
  return out;
}

Tensor random_reps(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t = Tensor::zeros({rows, dim});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

TEST(Backbone, DefaultGeometry) {
  const ModelConfig cfg;
  EXPECT_EQ(cfg.backbone.feature_channels(), 16u);
  EXPECT_EQ(cfg.backbone.feature_height(), 6u);
  EXPECT_EQ(cfg.backbone.feature_width(), 6u);
  EXPECT_EQ(cfg.backbone.flatten_size(), 576u);
  const ModelParams p = ModelParams::init(cfg, 1);
  EXPECT_EQ(p.get("f.fc.w").shape(), (uscl::nd::Shape{576, 64}));
  EXPECT_EQ(p.get("g.fc1.w").shape(), (uscl::nd::Shape{64, 64}));
  EXPECT_EQ(p.get("g.fc2.w").shape(), (uscl::nd::Shape{64, 32}));
  EXPECT_EQ(p.get("h.w").shape(), (uscl::nd::Shape{64, 3}));
}

TEST(Backbone, StageThatDoesNotFitIsRejected) {
  ModelConfig cfg;
  cfg.backbone.height = cfg.backbone.width = 6;
  EXPECT_THROW(uscl::validate(cfg), uscl::ContractError);
}

TEST(Encode, ZeroWeightsGiveEqualRows) {
  ModelParams p(ModelConfig{});
  p.get("f.fc.b").values()[3] = 0.7;
  const Tensor r = uscl::encode_frames(p, random_frames(4, 32, 2));
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(r[i * 64 + j], r[j]);
  EXPECT_EQ(r[3], 0.7);
}

TEST(Encode, DuplicatedImageGivesDuplicatedRow) {
  const ModelParams p = ModelParams::init(ModelConfig{}, 3);
  auto frames = random_frames(3, 32, 4);
  frames[1] = frames[0];
  const Tensor r = uscl::encode_frames(p, frames);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(r[j], r[64 + j]);
}

TEST(Encode, RandomInputsGiveFiniteReps) {
  const ModelParams p = ModelParams::init(ModelConfig{}, 5);
  const Tensor r = uscl::encode_frames(p, random_frames(6, 32, 6));
  EXPECT_EQ(r.shape(), (uscl::nd::Shape{6, 64}));
  for (double v : r.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encode, WrongImageSizeIsRejected) {
  const ModelParams p = ModelParams::init(ModelConfig{}, 5);
  EXPECT_ANY_THROW(uscl::encode_frames(p, random_frames(2, 28, 6)));
}

TEST(Interleave, PairOrder) {
  const auto a = random_frames(2, 4, 7), b = random_frames(2, 4, 8);
  const auto rows = uscl::interleave_views(a, b);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].pixels, a[0].pixels);
  EXPECT_EQ(rows[1].pixels, b[0].pixels);
  EXPECT_EQ(rows[2].pixels, a[1].pixels);
  EXPECT_EQ(rows[3].pixels, b[1].pixels);
}

TEST(Project, ZeroSecondLayerGivesBiasRows) {
  ModelParams p = ModelParams::init(ModelConfig{}, 9);
  for (auto& v : p.get("g.fc2.w").values()) v = 0.0;
  for (std::size_t j = 0; j < 32; ++j) p.get("g.fc2.b").values()[j] = 0.1 * static_cast<double>(j);
  Graph g;
  const Tensor& z = g.value(uscl::project(g, p, g.input(random_reps(3, 64, 1))));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(z[i * 32 + j], 0.1 * static_cast<double>(j));
}

TEST(Project, PositivelyHomogeneousWithoutBiases) {
  ModelParams p = ModelParams::init(ModelConfig{}, 10);
  for (auto& v : p.get("g.fc1.b").values()) v = 0.0;
  for (auto& v : p.get("g.fc2.b").values()) v = 0.0;
  const Tensor r = random_reps(4, 64, 2);
  Tensor r2 = r;
  for (auto& v : r2.values()) v *= 2.0;
  Graph g;
  const Tensor z1 = g.value(uscl::project(g, p, g.input(r)));
  const Tensor z2 = g.value(uscl::project(g, p, g.input(r2)));
  for (std::size_t i = 0; i < z1.numel(); ++i) EXPECT_NEAR(z2[i], 2.0 * z1[i], 1e-12);
}

TEST(Project, ReluBlocksNegativePreactivations) {
  // With fc1 output all negative, the projection is constant in its input.
  ModelParams p = ModelParams::init(ModelConfig{}, 11);
  for (auto& v : p.get("g.fc1.w").values()) v = 0.0;
  for (auto& v : p.get("g.fc1.b").values()) v = -1.0;
  Tensor r = random_reps(2, 64, 3);
  r.set_requires_grad(true);
  Graph g;
  g.backward(g.sum_all(uscl::project(g, p, g.leaf(r))));
  for (double v : r.grad()) EXPECT_EQ(v, 0.0);
}

TEST(Project, WrongInputWidthIsRejected) {
  ModelParams p = ModelParams::init(ModelConfig{}, 12);
  Graph g;
  EXPECT_THROW(uscl::project(g, p, g.input(random_reps(2, 63, 3))), uscl::ShapeError);
}

TEST(Classify, ZeroWeightsGiveUniformRows) {
  ModelParams p(ModelConfig{});
  Graph g;
  for (double v : g.value(uscl::classify(g, p, g.input(random_reps(3, 64, 4)))).values())
    EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Classify, LogOneTwoThreeLogits) {
  // Zero weights, biases carry the logits.
  ModelParams p(ModelConfig{});
  auto b = p.get("h.b").values();
  b[0] = std::log(1.0);
  b[1] = std::log(2.0);
  b[2] = std::log(3.0);
  Graph g;
  const Tensor& o = g.value(uscl::classify(g, p, g.input(random_reps(1, 64, 5))));
  EXPECT_NEAR(o[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(o[1], 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(o[2], 3.0 / 6.0, 1e-12);
}

TEST(Classify, ShiftInvariantAndRowStochastic) {
  ModelParams p = ModelParams::init(ModelConfig{}, 13);
  const Tensor r = random_reps(5, 64, 6);
  Graph g;
  const Tensor o1 = g.value(uscl::classify(g, p, g.input(r)));
  for (auto& v : p.get("h.b").values()) v += 4.5;
  const Tensor o2 = g.value(uscl::classify(g, p, g.input(r)));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      s += o1[i * 3 + c];
      EXPECT_NEAR(o1[i * 3 + c], o2[i * 3 + c], 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(GradientFlow, ClassifierGetsGradOnlyThroughClassify) {
  ModelParams p = ModelParams::init(ModelConfig{}, 14);
  p.set_requires_grad(true);
  const Tensor images = uscl::images_to_tensor(random_frames(4, 32, 7));
  Graph g;
  Var r = uscl::encode(g, p, g.input(images));
  g.backward(g.sum_all(g.mul(uscl::project(g, p, r), uscl::project(g, p, r))));
  for (const auto& [name, t] : p.tensors()) {
    if (name.starts_with("h.")) {
      EXPECT_FALSE(t.has_grad()) << name;
    } else {
      ASSERT_TRUE(t.has_grad()) << name;
    }
  }
}

TEST(Params, FreezingAGroupStopsItsGrads) {
  ModelParams p = ModelParams::init(ModelConfig{}, 15);
  p.set_requires_grad(true);
  p.set_requires_grad(uscl::ParamGroup::kConv, false);
  const Tensor images = uscl::images_to_tensor(random_frames(2, 32, 8));
  Graph g;
  g.backward(g.sum_all(uscl::encode(g, p, g.input(images))));
  for (auto* t : p.group(uscl::ParamGroup::kConv)) EXPECT_FALSE(t->has_grad());
  for (auto* t : p.group(uscl::ParamGroup::kBackboneFc)) EXPECT_TRUE(t->has_grad());
}

TEST(Params, ResetClassifierChangesClassCount) {
  ModelParams p = ModelParams::init(ModelConfig{}, 16);
  p.reset_classifier(5, 2);
  EXPECT_EQ(p.get("h.w").shape(), (uscl::nd::Shape{64, 5}));
  EXPECT_EQ(p.config().num_classes, 5u);
  EXPECT_THROW(p.get("nope"), uscl::ContractError);
}

TEST(Checkpoint, RoundTripIsExact) {
  ModelConfig cfg;
  cfg.backbone.rep_dim = 16;
  cfg.proj_hidden = 12;
  cfg.proj_dim = 8;
  cfg.num_classes = 4;
  const ModelParams p = ModelParams::init(cfg, 17);
  const auto bytes = uscl::encode_checkpoint(p);
  const ModelParams q = uscl::decode_checkpoint(bytes);
  EXPECT_EQ(q.config().backbone.rep_dim, 16u);
  EXPECT_EQ(q.config().num_classes, 4u);
  ASSERT_EQ(q.tensors().size(), p.tensors().size());
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    EXPECT_EQ(q.tensors()[i].name, p.tensors()[i].name);
    EXPECT_EQ(q.tensors()[i].tensor.shape(), p.tensors()[i].tensor.shape());
    EXPECT_EQ(q.tensors()[i].tensor.data(), p.tensors()[i].tensor.data());
  }
  EXPECT_EQ(uscl::encode_checkpoint(q), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / ("uscl_ckpt_" + std::to_string(::getpid()) + ".bin");
  const ModelParams p = ModelParams::init(ModelConfig{}, 18);
  uscl::save_checkpoint(p, path);
  const ModelParams q = uscl::load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(uscl::encode_checkpoint(q), uscl::encode_checkpoint(p));
}

TEST(Checkpoint, VersionMismatchBadMagicAndTruncation) {
  const auto bytes = uscl::encode_checkpoint(ModelParams::init(ModelConfig{}, 19));
  ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "USCL");
  auto wrong_version = bytes;
  wrong_version[4] = static_cast<std::uint8_t>(uscl::kCheckpointVersion + 1);
  EXPECT_THROW(uscl::decode_checkpoint(wrong_version), uscl::LoadError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(uscl::decode_checkpoint(bad_magic), uscl::ParseError);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(uscl::decode_checkpoint(truncated), uscl::ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_ANY_THROW(uscl::decode_checkpoint(trailing));
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_ANY_THROW(uscl::load_checkpoint("/nonexistent/dir/ckpt.bin"));
}

}  // namespace
