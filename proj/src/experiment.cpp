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

#include "uscl/experiment.hpp"

#include <chrono>

#include "uscl/errors.hpp"

namespace uscl {

AblationBenchmark AblationBenchmark::desk() {
  AblationBenchmark b;
  b.data = SyntheticConfig{};
  b.data.signal = 0.1;
  b.data.noise = 0.1;
  b.data.structure_blobs = 4;
  b.data.structure = 0.4;
  b.data.clutter_blobs = 4;
  b.data.clutter = 0.4;
  b.data_seed = 7;
  b.train.epochs = 50;
  b.train.batch_size = 8;
  b.train.seed = 7;
  b.probe.seed = 7;
  return b;
}

Dataset downstream_dataset(const AblationBenchmark& bench) {
  const std::size_t classes = bench.data.num_classes;
  if (bench.downstream_videos < classes) throw ContractError("downstream set needs a video per class");
  SyntheticConfig cfg = bench.data;
  cfg.videos_per_class = (bench.downstream_videos + classes - 1) / classes;
  Dataset ds = generate_synthetic(cfg, bench.downstream_seed);
  // Drop surplus videos from the highest classes first.
  std::size_t surplus = ds.videos.size() - bench.downstream_videos;
  std::vector<Video> kept;
  for (std::size_t c = 0; c < classes; ++c) {
    const bool trim = c + surplus >= classes;
    std::size_t taken = 0;
    for (auto& v : ds.videos) {
      if (v.label != c) continue;
      if (trim && taken + 1 == cfg.videos_per_class) break;
      kept.push_back(std::move(v));
      ++taken;
    }
  }
  ds.videos = std::move(kept);
  return ds;
}

namespace {

AblationRow probe_encoder(const AblationBenchmark& bench, const ModelParams& params, const Dataset& downstream) {
  AblationRow row;
  row.probe = probe_cross_validated(params, downstream, bench.probe_folds, bench.probe);
  const FrameTable table = frame_table(downstream, params.config());
  row.cohesion = cluster_cohesion(encode_frames(params, table.frames), table.video_ids);
  return row;
}

Dataset pretraining_dataset(const AblationBenchmark& bench) {
  Dataset ds = generate_synthetic(bench.data, bench.data_seed);
  if (bench.labeled_fraction < 1.0) mask_labels(ds, bench.labeled_fraction, bench.data_seed);
  return ds;
}

}  // namespace

AblationRow run_variant(const AblationBenchmark& bench, const Ablation& ablation, const std::string& name) {
  const auto started = std::chrono::steady_clock::now();
  TrainConfig cfg = bench.train;
  cfg.ablation = ablation;
  const PretrainResult pre = pretrain(pretraining_dataset(bench), cfg);
  AblationRow row = probe_encoder(bench, pre.params, downstream_dataset(bench));
  row.name = name;
  row.ablation = ablation;
  if (!pre.record.steps.empty()) row.final_l_con = pre.record.steps.back().loss.l_con;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return row;
}

std::vector<AblationRow> run_ablation(const AblationBenchmark& bench) {
  return {
      run_variant(bench, Ablation::vanilla(), "vanilla"),
      run_variant(bench, {true, false, false}, "+I1"),
      run_variant(bench, {true, true, false}, "+I1+I2"),
      run_variant(bench, Ablation::full(), "+I1+I2+CE"),
  };
}

AblationRow run_random_init(const AblationBenchmark& bench) {
  const auto started = std::chrono::steady_clock::now();
  const Dataset ds = pretraining_dataset(bench);
  const ModelParams params = ModelParams::init(model_config_for(ds, bench.train), derive_seed(bench.train.seed, 0, "init"));
  AblationRow row = probe_encoder(bench, params, downstream_dataset(bench));
  row.name = "random-init";
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return row;
}

}  // namespace uscl
