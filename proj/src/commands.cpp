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

#include "uscl/commands.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <system_error>

#include "uscl/errors.hpp"
#include "uscl/model.hpp"

namespace uscl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// Resolved config without the [output] section, so the record depends only on
// what was trained.
std::string config_without_output(const RunConfig& cfg) {
  std::string text = render_config(cfg);
  const auto at = text.find("[output]");
  if (at != std::string::npos) text.erase(at);
  while (text.size() >= 2 && text.ends_with("\n\n")) text.pop_back();
  return text;
}

json breakdown_json(const LossBreakdown& b) {
  return {{"l_con", b.l_con}, {"l_sup", b.l_sup}, {"lambda", b.lambda}, {"total", b.total},
          {"n_labeled", b.n_labeled}};
}

json evaluation_to_json(const Evaluation& ev) {
  return {{"accuracy", ev.accuracy}, {"macro_f1", ev.macro_f1}, {"precision", ev.precision},
          {"recall", ev.recall},     {"f1", ev.f1},             {"confusion", ev.confusion},
          {"count", ev.count}};
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ModelParams load_frozen(const fs::path& checkpoint) {
  ModelParams params = load_checkpoint(checkpoint);
  params.set_requires_grad(false);
  return params;
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.manifest) return load_manifest(*cfg.manifest);
  if (cfg.synthetic) return generate_synthetic(*cfg.synthetic, cfg.data_seed);
  throw ContractError("config names no dataset");
}

void echo_config(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "config.ini", render_config(cfg));
}

fs::path cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.synthetic) throw ContractError("gen-data needs a synthetic dataset config");
  RunConfig echoed = cfg;
  echoed.output_dir = out_dir;
  echo_config(echoed);
  return save_dataset(generate_synthetic(*cfg.synthetic, cfg.data_seed), out_dir);
}

std::string run_record_jsonl(const RunRecord& record) {
  std::string out;
  std::size_t next_eval = 0;
  auto flush_evals = [&](std::size_t upto_step) {
    while (next_eval < record.evals.size() && record.evals[next_eval].step <= upto_step) {
      const auto& e = record.evals[next_eval++];
      json line = {{"kind", "val"}, {"epoch", e.epoch}, {"step", e.step}};
      line.update(breakdown_json(e.val_loss));
      out += line.dump() + "\n";
    }
  };
  for (const auto& s : record.steps) {
    flush_evals(s.step);
    json line = {{"kind", "step"}, {"epoch", s.epoch}, {"step", s.step}};
    line.update(breakdown_json(s.loss));
    line["classifier_grad_norm"] = s.classifier_grad_norm;
    out += line.dump() + "\n";
  }
  flush_evals(static_cast<std::size_t>(-1));
  return out;
}

std::string evaluation_json(const Evaluation& ev) { return evaluation_to_json(ev).dump(2) + "\n"; }

PretrainResult cmd_pretrain(const RunConfig& cfg) {
  echo_config(cfg);
  Dataset ds = load_dataset(cfg);
  if (cfg.labeled_fraction < 1.0) mask_labels(ds, cfg.labeled_fraction, cfg.data_seed);

  PretrainResult result = pretrain(ds, cfg.train);
  const RunRecord& rec = result.record;

  save_checkpoint(result.params, cfg.output_dir / "checkpoint.bin");
  write_text(cfg.output_dir / "run.jsonl", run_record_jsonl(rec));

  json metrics = {
      {"seed", cfg.train.seed},
      {"ablation", ablation_name(cfg.train.ablation)},
      {"steps", rec.steps.size()},
      {"labeled_videos", ds.num_labeled()},
      {"videos", ds.videos.size()},
      {"train_videos", rec.train_videos},
      {"val_videos", rec.val_videos},
      {"adam", {{"beta1", rec.adam_constants.beta1}, {"beta2", rec.adam_constants.beta2},
                {"eps", rec.adam_constants.eps}, {"t", rec.adam_constants.t}}},
      {"discardable_prefixes", {"g.", "h."}},
      {"config", config_without_output(cfg)},
  };
  if (!rec.steps.empty()) metrics["final"] = breakdown_json(rec.steps.back().loss);
  if (!rec.evals.empty()) metrics["final_val"] = breakdown_json(rec.evals.back().val_loss);
  write_text(cfg.output_dir / "metrics.json", metrics.dump(2) + "\n");
  // Wall-clock lives apart from the run record so reruns compare byte for byte.
  write_text(cfg.output_dir / "timing.json", json{{"wall_seconds", rec.wall_seconds}}.dump(2) + "\n");
  return result;
}

AdaptResult cmd_adapt(const RunConfig& cfg, const fs::path& checkpoint) {
  echo_config(cfg);
  const Dataset ds = load_dataset(cfg);
  const ModelParams params = load_frozen(checkpoint);
  AdaptResult result = adapt(params, ds, cfg.adapt_mode, cfg.adapt);
  json out = evaluation_to_json(result.metrics);
  out["mode"] = adapt_mode_name(cfg.adapt_mode);
  out["checkpoint"] = checkpoint.string();
  out["train_videos"] = result.train_videos;
  out["val_videos"] = result.val_videos;
  write_text(cfg.output_dir / (std::string("adapt_") + adapt_mode_name(cfg.adapt_mode) + ".json"),
             out.dump(2) + "\n");
  return result;
}

Evaluation cmd_eval(const RunConfig& cfg, const fs::path& checkpoint) {
  echo_config(cfg);
  const Dataset ds = load_dataset(cfg);
  ModelParams params = load_frozen(checkpoint);
  if (params.config().num_classes != ds.num_classes) {
    throw ContractError("eval: checkpoint classifier has " + std::to_string(params.config().num_classes) +
                        " classes, dataset has " + std::to_string(ds.num_classes));
  }
  std::vector<std::size_t> predicted, truth;
  const FrameTable table = frame_table(ds, params.config());
  for (std::size_t r = 0; r < table.frames.size(); ++r) {
    const auto& label = ds.videos[table.video_index[r]].label;
    if (!label) throw ContractError("eval: video " + table.video_ids[r] + " is unlabeled");
    truth.push_back(*label);
  }
  nd::Graph g;
  const nd::Tensor images = images_to_tensor(table.frames);
  const nd::Tensor& probs = g.value(classify(g, params, encode(g, params, g.input(images))));
  const std::size_t c = probs.dim(1);
  for (std::size_t i = 0; i < probs.dim(0); ++i) {
    const auto row = probs.values().subspan(i * c, c);
    predicted.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  Evaluation ev = evaluate(predicted, truth, ds.num_classes);
  json out = evaluation_to_json(ev);
  out["checkpoint"] = checkpoint.string();
  write_text(cfg.output_dir / "eval.json", out.dump(2) + "\n");
  return ev;
}

std::size_t cmd_export_embeddings(const RunConfig& cfg, const fs::path& checkpoint) {
  echo_config(cfg);
  const Dataset ds = load_dataset(cfg);
  const ModelParams params = load_frozen(checkpoint);
  const FrameTable table = frame_table(ds, params.config());
  const nd::Tensor reps = encode_frames(params, table.frames);
  const std::size_t d = reps.dim(1);

  std::ostringstream csv;
  csv << "video_id,frame_index";
  for (std::size_t k = 0; k < d; ++k) csv << ",dim_" << k;
  csv << "\n";
  for (std::size_t r = 0; r < table.frames.size(); ++r) {
    csv << table.video_ids[r] << "," << table.frames[r].index;
    for (std::size_t k = 0; k < d; ++k) csv << "," << fmt(reps[r * d + k]);
    csv << "\n";
  }
  write_text(cfg.output_dir / "embeddings.csv", csv.str());
  return table.frames.size();
}

}  // namespace uscl
