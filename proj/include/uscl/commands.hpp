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

// Command implementations behind the `uscl` tool. Each command first writes
// the resolved config to <output dir>/config.ini.
//
// Output files:
//   gen-data           <out>/manifest.json, <out>/<video>/frame_XXXX.pgm
//   pretrain           checkpoint.bin, run.jsonl, metrics.json, timing.json
//   adapt              adapt_<mode>.json
//   eval               eval.json
//   export-embeddings  embeddings.csv

#pragma once

#include <filesystem>
#include <string>

#include "uscl/config.hpp"
#include "uscl/dataset.hpp"
#include "uscl/train.hpp"

namespace uscl {

// Dataset named by the config (manifest or in-memory synthetic). Labels are
// left untouched.
Dataset load_dataset(const RunConfig& cfg);

// Writes the resolved config into cfg.output_dir.
void echo_config(const RunConfig& cfg);

// Materializes the synthetic dataset under `out_dir`; returns the manifest path.
std::filesystem::path cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Trains on the config's dataset with labels masked to dataset.labels.
PretrainResult cmd_pretrain(const RunConfig& cfg);

AdaptResult cmd_adapt(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// Image-level metrics of the checkpoint's own classifier on every frame.
Evaluation cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// One CSV row per frame: video_id,frame_index,dim_0..dim_{D-1}. Returns the row count.
std::size_t cmd_export_embeddings(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// Serializers shared with the Python bindings.
std::string run_record_jsonl(const RunRecord& record);
std::string evaluation_json(const Evaluation& ev);

}  // namespace uscl
