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

// uscl: dataset generation, pretraining, adaptation, evaluation and
// embedding export driven by a run config file.

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "uscl/commands.hpp"
#include "uscl/config.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> ablation;
  std::optional<double> labels;
  std::string checkpoint;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run config file")->required();
  cmd->add_option("--seed", f.seed, "Seed override for data, training and adaptation");
  cmd->add_option("--out", f.out, "Output directory override");
  cmd->add_option("--ablation", f.ablation, "Ablation preset")
      ->check(CLI::IsMember({"none", "i1", "i1i2", "full"}));
  cmd->add_option("--labels", f.labels, "Labeled fraction of videos")->check(CLI::Range(0.0, 1.0));
}

void add_checkpoint(CLI::App* cmd, Flags& f) {
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint produced by pretrain")->required();
}

uscl::RunConfig resolve(const Flags& f) {
  uscl::RunConfig cfg = uscl::load_config(f.config);
  if (f.seed) uscl::set_seed(cfg, *f.seed);
  if (f.out) cfg.output_dir = *f.out;
  if (f.ablation) cfg.train.ablation = uscl::ablation_from_name(*f.ablation);
  if (f.labels) cfg.labeled_fraction = *f.labels;
  if (f.mode) cfg.adapt_mode = uscl::adapt_mode_from_name(*f.mode);
  uscl::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised video contrastive pretraining"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as PGM frames + manifest");
  add_common(gen, f);
  auto* pre = app.add_subcommand("pretrain", "Pretrain the encoder");
  add_common(pre, f);
  auto* ada = app.add_subcommand("adapt", "Train a fresh classifier on a pretrained encoder");
  add_common(ada, f);
  add_checkpoint(ada, f);
  ada->add_option("--mode", f.mode, "Adaptation mode")->check(CLI::IsMember({"linear_probe", "last_layers"}));
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint's classifier");
  add_common(ev, f);
  add_checkpoint(ev, f);
  auto* exp = app.add_subcommand("export-embeddings", "Write per-frame representations as CSV");
  add_common(exp, f);
  add_checkpoint(exp, f);

  CLI11_PARSE(app, argc, argv);

  try {
    const uscl::RunConfig cfg = resolve(f);
    if (gen->parsed()) {
      const auto manifest = uscl::cmd_gen_data(cfg, cfg.output_dir);
      std::cout << "wrote " << manifest.string() << "\n";
    } else if (pre->parsed()) {
      const auto result = uscl::cmd_pretrain(cfg);
      std::cout << "pretrained " << result.record.steps.size() << " steps; checkpoint "
                << (cfg.output_dir / "checkpoint.bin").string() << "\n";
    } else if (ada->parsed()) {
      const auto result = uscl::cmd_adapt(cfg, f.checkpoint);
      std::cout << uscl::adapt_mode_name(cfg.adapt_mode) << " accuracy " << result.metrics.accuracy << " macro-F1 "
                << result.metrics.macro_f1 << "\n";
    } else if (ev->parsed()) {
      const auto result = uscl::cmd_eval(cfg, f.checkpoint);
      std::cout << "accuracy " << result.accuracy << " macro-F1 " << result.macro_f1 << "\n";
    } else if (exp->parsed()) {
      const auto rows = uscl::cmd_export_embeddings(cfg, f.checkpoint);
      std::cout << "wrote " << rows << " rows to " << (cfg.output_dir / "embeddings.csv").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
