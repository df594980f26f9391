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

// Runs the desk ablation benchmark and prints one line per variant.

#include <CLI11.hpp>
#include <cstdio>

#include "uscl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale ablation benchmark"};
  auto bench = uscl::AblationBenchmark::desk();
  app.add_option("--seed", bench.train.seed, "Training seed");
  app.add_option("--data-seed", bench.data_seed, "Pretraining data seed");
  app.add_option("--downstream-seed", bench.downstream_seed, "Downstream data seed");
  app.add_option("--epochs", bench.train.epochs, "Pretraining epochs");
  app.add_option("--labels", bench.labeled_fraction, "Labeled fraction of pretraining videos");
  app.add_option("--signal", bench.data.signal, "Class grating amplitude");
  app.add_option("--clutter", bench.data.clutter, "Transient blob amplitude");
  app.add_option("--blobs", bench.data.clutter_blobs, "Transient blobs per frame");
  app.add_option("--structure", bench.data.structure, "Per-video blob amplitude");
  app.add_option("--structure-blobs", bench.data.structure_blobs, "Per-video blobs");
  app.add_option("--noise", bench.data.noise, "Pixel noise half-width");
  app.add_option("--drift", bench.data.drift, "Drift per frame in pixels");
  bool random_init = false;
  app.add_flag("--random-init", random_init, "Also probe a randomly initialized encoder");
  CLI11_PARSE(app, argc, argv);
  bench.probe.seed = bench.train.seed;

  auto print = [](const uscl::AblationRow& r) {
    std::printf("%-12s acc %.4f  macro-F1 %.4f  cohesion gap %.4f  l_con %.4f  %.1fs\n", r.name.c_str(),
                r.probe.accuracy, r.probe.macro_f1, r.cohesion.gap, r.final_l_con, r.seconds);
    std::fflush(stdout);
  };
  if (random_init) print(uscl::run_random_init(bench));
  for (const auto& [name, ab] : std::vector<std::pair<std::string, uscl::Ablation>>{
           {"vanilla", uscl::Ablation::vanilla()},
           {"+I1", {true, false, false}},
           {"+I1+I2", {true, true, false}},
           {"+I1+I2+CE", uscl::Ablation::full()}}) {
    print(uscl::run_variant(bench, ab, name));
  }
  return 0;
}
