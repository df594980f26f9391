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

// Run configuration files: flat `key = value` lines under `[section]`
// headers.
//
//   [dataset]   manifest = PATH  or  synthetic = true (+ generator keys),
//               seed, labels, samples_per_second
//   [train]     epochs, batch_size, lr, weight_decay, lambda, tau, seed,
//               eval_every, val_fraction, rep_dim, proj_hidden, proj_dim
//   [spg]       alpha, beta, crop_scale_min, crop_scale_max, flip_prob,
//               max_rotation, brightness, contrast, output_size
//   [ablation]  enable_I1, enable_I2, enable_CE
//   [adapt]     mode, epochs, lr, weight_decay, val_fraction
//   [output]    dir
//
// Unknown sections or keys are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "uscl/dataset.hpp"
#include "uscl/train.hpp"

namespace uscl {

struct RunConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<SyntheticConfig> synthetic;
  // Seed for synthetic generation and label masking.
  std::uint64_t data_seed = 0;
  double labeled_fraction = 1.0;
  TrainConfig train;
  AdaptMode adapt_mode = AdaptMode::kLinearProbe;
  AdaptConfig adapt;
  std::filesystem::path output_dir = "out";
};

// Throws ParseError (with line number) or ContractError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Fully resolved config in the same format; parse_config(render_config(c))
// reproduces c.
std::string render_config(const RunConfig& cfg);

// "none" (vanilla), "i1", "i1i2", "full".
Ablation ablation_from_name(std::string_view name);
std::string ablation_name(const Ablation& a);
AdaptMode adapt_mode_from_name(std::string_view name);

// Overrides both the data and the training seeds.
void set_seed(RunConfig& cfg, std::uint64_t seed);

void validate(const RunConfig& cfg);

}  // namespace uscl
