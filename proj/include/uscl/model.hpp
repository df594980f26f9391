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

// Backbone f (conv stages + fc), projection head g (two-layer MLP) and linear
// classifier h, all expressed over nd::Graph.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uscl/dataset.hpp"
#include "uscl/ndmath.hpp"

namespace uscl {

struct ConvStage {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

struct BackboneConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  // Each stage is conv -> relu -> max_pool(pool).
  std::vector<ConvStage> stages{{8, 3, 1}, {16, 3, 1}};
  std::size_t pool = 2;
  std::size_t rep_dim = 64;

  // Channels, height and width after the last stage.
  std::size_t feature_channels() const;
  std::size_t feature_height() const;
  std::size_t feature_width() const;
  std::size_t flatten_size() const;
};

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t proj_hidden = 64;
  std::size_t proj_dim = 32;
  std::size_t num_classes = 3;
};

// Throws ContractError if a stage does not fit the input.
void validate(const ModelConfig& cfg);

struct NamedTensor {
  std::string name;
  nd::Tensor tensor;
};

enum class ParamGroup { kConv, kBackboneFc, kProjection, kClassifier };

// Parameter tensors, stored in a fixed order:
//   f.conv<i>.w [Cout,Cin,k,k], f.conv<i>.b [Cout], f.fc.w [F,Dr], f.fc.b [Dr],
//   g.fc1.w [Dr,Dh], g.fc1.b [Dh], g.fc2.w [Dh,Dz], g.fc2.b [Dz],
//   h.w [Dr,C], h.b [C].
// Dense weights are stored input-major so a layer is x * W + b.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelConfig cfg);  // all zeros

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<NamedTensor>& tensors() noexcept { return tensors_; }
  const std::vector<NamedTensor>& tensors() const noexcept { return tensors_; }

  nd::Tensor& get(std::string_view name);
  const nd::Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<nd::Tensor*> group(ParamGroup g);
  std::vector<nd::Tensor*> all();

  void set_requires_grad(ParamGroup g, bool on);
  void set_requires_grad(bool on);
  void zero_grad();
  // Replaces the classifier with a fresh one for `num_classes`.
  void reset_classifier(std::size_t num_classes, std::uint64_t seed);

  bool all_finite() const;

 private:
  ModelConfig cfg_;
  std::vector<NamedTensor> tensors_;
};

// Batch of equally sized frames as [B, 1, H, W].
nd::Tensor images_to_tensor(std::span<const Frame> images);

// Interleaves pair views as rows x1_0, x2_0, x1_1, x2_1, ...
std::vector<Frame> interleave_views(std::span<const Frame> first, std::span<const Frame> second);

// Conv stages only: [B,1,H,W] -> [B, flatten_size].
nd::Var conv_features(nd::Graph& g, ModelParams& p, nd::Var images);
// Full backbone: [B,1,H,W] -> R [B, Dr].
nd::Var encode(nd::Graph& g, ModelParams& p, nd::Var images);
// Final backbone fc only, from conv features.
nd::Var backbone_fc(nd::Graph& g, ModelParams& p, nd::Var features);
// R -> Z [B, Dz]: fc -> relu -> fc, no normalization.
nd::Var project(nd::Graph& g, ModelParams& p, nd::Var reps);
// R -> O [B, C] row-stochastic.
nd::Var classify(nd::Graph& g, ModelParams& p, nd::Var reps);

// Gradient-free helpers.
nd::Tensor encode_frames(const ModelParams& p, std::span<const Frame> images);
nd::Tensor conv_features_of(const ModelParams& p, std::span<const Frame> images);

// Checkpoint: little-endian "USCL", u32 version, then per tensor
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 payload.
// The model configuration travels as the tensor "meta.config".
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& p);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace uscl
