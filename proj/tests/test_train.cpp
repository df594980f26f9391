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
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "uscl/errors.hpp"
#include "uscl/train.hpp"

namespace {

using uscl::Dataset;
using uscl::ModelParams;
using uscl::TrainConfig;
using uscl::nd::Tensor;

Dataset small_dataset(std::uint64_t seed, std::size_t classes = 3, std::size_t per_class = 4) {
  uscl::SyntheticConfig cfg;
  cfg.num_classes = classes;
  cfg.videos_per_class = per_class;
  cfg.frames_per_video = 6;
  cfg.width = cfg.height = 16;
  return uscl::generate_synthetic(cfg, seed);
}

TrainConfig small_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.seed = 3;
  cfg.augment.output_size = 16;
  cfg.model.backbone.rep_dim = 16;
  cfg.model.proj_hidden = 16;
  cfg.model.proj_dim = 8;
  return cfg;
}

std::vector<Tensor*> ptrs(std::vector<Tensor>& ts) {
  std::vector<Tensor*> out;
  for (auto& t : ts) out.push_back(&t);
  return out;
}

TEST(Adam, FirstStepOnUnitGradient) {
  std::vector<Tensor> p{Tensor({1}, {0.0}, true)};
  p[0].mutable_grad()[0] = 1.0;
  uscl::AdamState st;
  uscl::adam_step(ptrs(p), st, 3e-4, 0.0);
  EXPECT_NEAR(p[0][0], -3e-4 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0][0], -2.99999e-4, 1e-9);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<Tensor> p{Tensor({3}, {0.5, -1.0, 2.0}, true), Tensor({2}, {1.0, 1.0}, false)};
  p[0].zero_grad();
  uscl::AdamState st;
  for (int i = 0; i < 3; ++i) uscl::adam_step(ptrs(p), st, 3e-4, 0.0);
  EXPECT_EQ(p[0].data(), (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_EQ(p[1].data(), (std::vector<double>{1.0, 1.0}));
}

TEST(Adam, MatchesReferenceRecurrence) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Tensor> p{Tensor({4}, {0.3, -0.7, 1.1, 0.0}, true)};
  std::vector<double> ref = p[0].data(), m(4, 0.0), v(4, 0.0);
  uscl::AdamState st;
  const double lr = 1e-2, wd = 1e-2;
  for (int t = 1; t <= 20; ++t) {
    std::vector<double> g(4);
    for (auto& x : g) x = n(rng);
    for (std::size_t i = 0; i < 4; ++i) p[0].mutable_grad()[i] = g[i];
    uscl::adam_step(ptrs(p), st, lr, wd);
    for (std::size_t i = 0; i < 4; ++i) {
      const double gi = g[i] + wd * ref[i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1.0 - std::pow(0.9, t)), vh = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p[0][i], ref[i], 1e-14);
}

TEST(Adam, WeightDecayAloneShrinksMagnitude) {
  // Adam normalizes the step to about lr, so magnitudes above lr shrink.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::vector<Tensor> p{Tensor::zeros({50}, true)};
  for (auto& x : p[0].values()) x = (rng() % 2 ? 1.0 : -1.0) * u(rng);
  const std::vector<double> before = p[0].data();
  p[0].zero_grad();
  uscl::AdamState st;
  uscl::adam_step(ptrs(p), st, 3e-4, 1e-4);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_LT(std::abs(p[0][i]), std::abs(before[i]));
}

TEST(Adam, IdenticalHistoriesGiveIdenticalUpdates) {
  std::vector<Tensor> p{Tensor({1}, {0.2}, true), Tensor({1}, {0.2}, true)};
  uscl::AdamState st;
  for (double g : {0.5, -1.0, 3.0, 0.1}) {
    p[0].mutable_grad()[0] = g;
    p[1].mutable_grad()[0] = g;
    uscl::adam_step(ptrs(p), st, 1e-3, 1e-4);
    EXPECT_EQ(p[0][0], p[1][0]);
  }
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdating) {
  std::vector<Tensor> p{Tensor({2}, {1.0, 2.0}, true), Tensor({1}, {3.0}, true)};
  p[0].mutable_grad()[0] = 1.0;
  p[1].mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  uscl::AdamState st;
  EXPECT_THROW(uscl::adam_step(ptrs(p), st, 1e-3, 0.0), uscl::DomainError);
  EXPECT_EQ(p[0].data(), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(p[1][0], 3.0);
}

TEST(Evaluate, PerfectPredictions) {
  const std::vector<std::size_t> y{0, 1, 2, 1, 0};
  const auto e = uscl::evaluate(y, y, 3);
  EXPECT_EQ(e.accuracy, 1.0);
  EXPECT_EQ(e.macro_f1, 1.0);
  for (double f : e.f1) EXPECT_EQ(f, 1.0);
}

TEST(Evaluate, AllOneClassOnBalancedSet) {
  const std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2}, pred(6, 2);
  const auto e = uscl::evaluate(pred, truth, 3);
  EXPECT_NEAR(e.accuracy, 1.0 / 3.0, 1e-15);
  // Class 2: precision 1/3, recall 1, F1 0.5; the other classes are never predicted.
  EXPECT_NEAR(e.macro_f1, 0.5 / 3.0, 1e-12);
  EXPECT_EQ(e.f1[0], 0.0);
  EXPECT_NEAR(e.f1[2], 0.5, 1e-12);
}

TEST(Evaluate, ConfusionRowsSumToClassCounts) {
  std::mt19937_64 rng(3);
  std::vector<std::size_t> truth(200), pred(200), counts(4, 0);
  for (std::size_t i = 0; i < 200; ++i) {
    truth[i] = rng() % 4;
    pred[i] = rng() % 4;
    ++counts[truth[i]];
  }
  const auto e = uscl::evaluate(pred, truth, 4);
  std::size_t diag = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t row = 0;
    for (std::size_t k = 0; k < 4; ++k) row += e.confusion[c][k];
    EXPECT_EQ(row, counts[c]);
    diag += e.confusion[c][c];
  }
  EXPECT_DOUBLE_EQ(e.accuracy, static_cast<double>(diag) / 200.0);
  EXPECT_EQ(e.count, 200u);
}

TEST(Cohesion, IdenticalEmbeddings) {
  const Tensor emb({4, 2}, {1, 2, 1, 2, 1, 2, 1, 2});
  const std::vector<std::string> ids{"a", "a", "b", "b"};
  const auto c = uscl::cluster_cohesion(emb, ids);
  EXPECT_NEAR(c.intra, 1.0, 1e-12);
  EXPECT_NEAR(c.inter, 1.0, 1e-12);
  EXPECT_NEAR(c.gap, 0.0, 1e-12);
}

TEST(Cohesion, OrthogonalVideos) {
  const Tensor emb({5, 2}, {3, 0, 1, 0, 2, 0, 0, 1, 0, 5});
  const std::vector<std::string> ids{"a", "a", "a", "b", "b"};
  const auto c = uscl::cluster_cohesion(emb, ids);
  EXPECT_NEAR(c.intra, 1.0, 1e-12);
  EXPECT_NEAR(c.inter, 0.0, 1e-12);
  EXPECT_NEAR(c.gap, 1.0, 1e-12);
}

TEST(Cohesion, MatchesPairwiseOracleAndSkipsSingletons) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor emb = Tensor::zeros({7, 3});
  for (auto& v : emb.values()) v = n(rng);
  const std::vector<std::string> ids{"a", "b", "a", "c", "b", "b", "a"};
  double intra = 0, inter = 0;
  std::size_t ni = 0, nx = 0;
  auto cosine = [&](std::size_t i, std::size_t j) {
    double d = 0, a = 0, b = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      d += emb[i * 3 + k] * emb[j * 3 + k];
      a += emb[i * 3 + k] * emb[i * 3 + k];
      b += emb[j * 3 + k] * emb[j * 3 + k];
    }
    return d / std::sqrt(a * b);
  };
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = i + 1; j < 7; ++j) {
      if (ids[i] == ids[j]) {
        intra += cosine(i, j);
        ++ni;
      } else {
        inter += cosine(i, j);
        ++nx;
      }
    }
  const auto c = uscl::cluster_cohesion(emb, ids);
  EXPECT_NEAR(c.intra, intra / static_cast<double>(ni), 1e-12);
  EXPECT_NEAR(c.inter, inter / static_cast<double>(nx), 1e-12);
  EXPECT_EQ(c.skipped, (std::vector<std::string>{"c"}));
  EXPECT_GE(c.gap, -2.0);
  EXPECT_LE(c.gap, 2.0);
}

TEST(Split, DeterministicStratifiedAndDisjoint) {
  Dataset ds = small_dataset(1, 3, 10);
  uscl::mask_labels(ds, 0.5, 2);
  const auto a = uscl::split_videos(ds, 0.2, 9), b = uscl::split_videos(ds, 0.2, 9);
  EXPECT_EQ(a, b);
  std::set<std::size_t> all(a.first.begin(), a.first.end());
  for (auto i : a.second) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), ds.videos.size());
  EXPECT_EQ(a.second.size(), 6u);
  EXPECT_NE(uscl::split_videos(ds, 0.2, 10).second, a.second);
}

TEST(Pretrain, ZeroEpochsReturnsInitialization) {
  const Dataset ds = small_dataset(2);
  const TrainConfig cfg = small_config(0);
  const auto res = uscl::pretrain(ds, cfg);
  const ModelParams init = ModelParams::init(uscl::model_config_for(ds, cfg), uscl::derive_seed(cfg.seed, 0, "init"));
  EXPECT_EQ(uscl::encode_checkpoint(res.params), uscl::encode_checkpoint(init));
  EXPECT_TRUE(res.record.steps.empty());
}

TEST(Pretrain, SameSeedIsBitwiseIdentical) {
  const Dataset ds = small_dataset(3);
  const auto a = uscl::pretrain(ds, small_config(2)), b = uscl::pretrain(ds, small_config(2));
  EXPECT_EQ(uscl::encode_checkpoint(a.params), uscl::encode_checkpoint(b.params));
  ASSERT_EQ(a.record.steps.size(), b.record.steps.size());
  for (std::size_t i = 0; i < a.record.steps.size(); ++i) EXPECT_EQ(a.record.steps[i].loss.total, b.record.steps[i].loss.total);
}

TEST(Pretrain, StepCountAndLossAccounting) {
  Dataset ds = small_dataset(4);
  uscl::mask_labels(ds, 0.5, 1);
  const auto res = uscl::pretrain(ds, small_config(3));
  const std::size_t train = res.record.train_videos.size();
  EXPECT_EQ(train + res.record.val_videos.size(), ds.videos.size());
  EXPECT_EQ(res.record.steps.size(), 3 * (train / 4));
  EXPECT_EQ(res.record.evals.size(), 3u);
  for (const auto& s : res.record.steps) {
    EXPECT_NEAR(s.loss.total, s.loss.l_con + 0.2 * s.loss.l_sup, 1e-12);
    EXPECT_GE(s.loss.l_con, 0.0);
    EXPECT_GE(s.loss.l_sup, 0.0);
    EXPECT_EQ(s.loss.n_labeled > 0, s.classifier_grad_norm > 0.0);
  }
}

TEST(Pretrain, UnlabeledRunHasNoSupervisedSignal) {
  Dataset ds = small_dataset(5);
  uscl::mask_labels(ds, 0.0, 1);
  const auto res = uscl::pretrain(ds, small_config(2));
  for (const auto& s : res.record.steps) {
    EXPECT_EQ(s.loss.l_sup, 0.0);
    EXPECT_EQ(s.loss.total, s.loss.l_con);
    EXPECT_EQ(s.classifier_grad_norm, 0.0);
  }
}

TEST(Pretrain, SupervisedOffForcesLambdaZero) {
  TrainConfig cfg = small_config(1);
  cfg.ablation.supervised = false;
  const auto res = uscl::pretrain(small_dataset(6), cfg);
  for (const auto& s : res.record.steps) {
    EXPECT_EQ(s.loss.lambda, 0.0);
    EXPECT_EQ(s.loss.total, s.loss.l_con);
  }
}

TEST(Pretrain, ContrastiveLossDecreasesOnDefaultData) {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 7;
  const auto res = uscl::pretrain(uscl::generate_synthetic(uscl::SyntheticConfig{}, 7), cfg);
  const auto& s = res.record.steps;
  ASSERT_GE(s.size(), 20u);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += s[i].loss.l_con;
    last += s[s.size() - 1 - i].loss.l_con;
  }
  EXPECT_LT(last, first);
}

TEST(Pretrain, TooFewVideosIsRejected) {
  TrainConfig cfg = small_config(1);
  cfg.batch_size = 64;
  EXPECT_ANY_THROW(uscl::pretrain(small_dataset(7), cfg));
}

TEST(Adapt, SingleClassIsTriviallyPerfect) {
  const Dataset ds = small_dataset(8, 1, 5);
  const ModelParams p = ModelParams::init(uscl::model_config_for(ds, small_config(0)), 1);
  uscl::AdaptConfig cfg;
  cfg.epochs = 5;
  const auto res = uscl::adapt(p, ds, uscl::AdaptMode::kLinearProbe, cfg);
  EXPECT_EQ(res.metrics.accuracy, 1.0);
}

TEST(Adapt, UnlabeledDataIsContractError) {
  Dataset ds = small_dataset(9);
  uscl::mask_labels(ds, 0.5, 1);
  const ModelParams p = ModelParams::init(uscl::model_config_for(ds, small_config(0)), 1);
  EXPECT_THROW(uscl::adapt(p, ds, uscl::AdaptMode::kLinearProbe, {}), uscl::ContractError);
}

TEST(Adapt, BothModesAreDeterministicAndLeaveBackboneConvsAlone) {
  const Dataset ds = small_dataset(10, 3, 5);
  const ModelParams p = ModelParams::init(uscl::model_config_for(ds, small_config(0)), 2);
  uscl::AdaptConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 4;
  for (auto mode : {uscl::AdaptMode::kLinearProbe, uscl::AdaptMode::kLastLayers}) {
    const auto a = uscl::adapt(p, ds, mode, cfg), b = uscl::adapt(p, ds, mode, cfg);
    EXPECT_EQ(a.train_videos, b.train_videos);
    EXPECT_EQ(a.val_videos, b.val_videos);
    EXPECT_EQ(a.metrics.accuracy, b.metrics.accuracy);
    EXPECT_EQ(a.val_videos.size(), 3u);
    EXPECT_EQ(a.params.get("f.conv0.w").data(), p.get("f.conv0.w").data());
    const bool fc_same = a.params.get("f.fc.w").data() == p.get("f.fc.w").data();
    EXPECT_EQ(fc_same, mode == uscl::AdaptMode::kLinearProbe) << uscl::adapt_mode_name(mode);
  }
}

TEST(Adapt, CrossValidatedProbePredictsEveryFrameOnce) {
  const Dataset ds = small_dataset(11, 3, 4);
  const ModelParams p = ModelParams::init(uscl::model_config_for(ds, small_config(0)), 3);
  uscl::AdaptConfig cfg;
  cfg.epochs = 10;
  const auto e = uscl::probe_cross_validated(p, ds, 4, cfg);
  EXPECT_EQ(e.count, ds.num_frames());
}

}  // namespace
