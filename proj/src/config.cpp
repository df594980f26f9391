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

#include "uscl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uscl/errors.hpp"

namespace uscl {

namespace pt = boost::property_tree;

namespace {

std::size_t line_offset(std::string_view text, std::size_t line) {
  std::size_t offset = 0;
  for (std::size_t l = 1; l < line && offset < text.size(); ++l) {
    const auto nl = text.find('\n', offset);
    if (nl == std::string_view::npos) return text.size();
    offset = nl + 1;
  }
  return offset;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ContractError("config: " + key + " = '" + value + "' is not " + expected);
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s, "a number");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s, "a non-negative integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, s, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter size_field(T RunConfig::*outer, std::size_t T::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) { c.*outer.*field = to_u64(k, v); };
}

// Table of recognised keys, "section.key" -> setter.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto synth = [](RunConfig& c) -> SyntheticConfig& {
      if (!c.synthetic) c.synthetic = SyntheticConfig{};
      return *c.synthetic;
    };
    t["dataset.manifest"] = [](RunConfig& c, const std::string&, const std::string& v) { c.manifest = v; };
    t["dataset.synthetic"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      if (to_bool(k, v)) synth(c);
    };
    t["dataset.num_classes"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).num_classes = to_u64(k, v);
    };
    t["dataset.videos_per_class"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).videos_per_class = to_u64(k, v);
    };
    t["dataset.frames_per_video"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).frames_per_video = to_u64(k, v);
    };
    t["dataset.width"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).width = to_u64(k, v);
    };
    t["dataset.height"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).height = to_u64(k, v);
    };
    t["dataset.drift"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).drift = to_double(k, v);
    };
    t["dataset.noise"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).noise = to_double(k, v);
    };
    t["dataset.frame_rate"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).frame_rate = to_double(k, v);
    };
    t["dataset.signal"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).signal = to_double(k, v);
    };
    t["dataset.structure_blobs"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).structure_blobs = to_u64(k, v);
    };
    t["dataset.structure"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).structure = to_double(k, v);
    };
    t["dataset.clutter_blobs"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).clutter_blobs = to_u64(k, v);
    };
    t["dataset.clutter"] = [synth](RunConfig& c, const std::string& k, const std::string& v) {
      synth(c).clutter = to_double(k, v);
    };
    t["dataset.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data_seed = to_u64(k, v); };
    t["dataset.labels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.labeled_fraction = to_double(k, v);
    };
    t["dataset.samples_per_second"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.samples_per_second = to_double(k, v);
    };

    t["train.epochs"] = size_field(&RunConfig::train, &TrainConfig::epochs);
    t["train.batch_size"] = size_field(&RunConfig::train, &TrainConfig::batch_size);
    t["train.eval_every"] = size_field(&RunConfig::train, &TrainConfig::eval_every);
    t["train.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_u64(k, v); };
    t["train.lr"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_double(k, v); };
    t["train.weight_decay"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.weight_decay = to_double(k, v);
    };
    t["train.lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.lambda = to_double(k, v);
    };
    t["train.tau"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.tau = to_double(k, v); };
    t["train.val_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.val_fraction = to_double(k, v);
    };
    t["train.rep_dim"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.model.backbone.rep_dim = to_u64(k, v);
    };
    t["train.proj_hidden"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.model.proj_hidden = to_u64(k, v);
    };
    t["train.proj_dim"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.model.proj_dim = to_u64(k, v);
    };

    t["spg.alpha"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.alpha = to_double(k, v); };
    t["spg.beta"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta = to_double(k, v); };
    t["spg.crop_scale_min"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.crop_scale_min = to_double(k, v);
    };
    t["spg.crop_scale_max"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.crop_scale_max = to_double(k, v);
    };
    t["spg.flip_prob"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.flip_prob = to_double(k, v);
    };
    t["spg.max_rotation"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.max_rotation = to_double(k, v);
    };
    t["spg.brightness"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.brightness = to_double(k, v);
    };
    t["spg.contrast"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.contrast = to_double(k, v);
    };
    t["spg.output_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.augment.output_size = to_u64(k, v);
    };

    t["ablation.enable_I1"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.ablation.pair_by_video = to_bool(k, v);
    };
    t["ablation.enable_I2"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.ablation.mixup = to_bool(k, v);
    };
    t["ablation.enable_CE"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.ablation.supervised = to_bool(k, v);
    };

    t["adapt.mode"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.adapt_mode = adapt_mode_from_name(v);
    };
    t["adapt.epochs"] = size_field(&RunConfig::adapt, &AdaptConfig::epochs);
    t["adapt.lr"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.adapt.lr = to_double(k, v); };
    t["adapt.weight_decay"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.adapt.weight_decay = to_double(k, v);
    };
    t["adapt.val_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.adapt.val_fraction = to_double(k, v);
    };

    t["output.dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message() + " on line " + std::to_string(e.line()), line_offset(text, e.line()));
  }

  RunConfig cfg;
  bool synthetic_off = false;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ContractError("config: key '" + section + "' outside of a section");
    if (section != "dataset" && section != "train" && section != "spg" && section != "ablation" &&
        section != "adapt" && section != "output") {
      throw ContractError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = setters().find(full);
      if (it == setters().end()) throw ContractError("config: unknown key '" + key + "' in [" + section + "]");
      const std::string value = node.get_value<std::string>();
      if (full == "dataset.synthetic" && !to_bool(full, value)) synthetic_off = true;
      it->second(cfg, full, value);
    }
  }
  if (synthetic_off && cfg.synthetic) {
    throw ContractError("config: generator keys given with synthetic = false");
  }
  // The seed flows to adaptation as well, so a run is fixed by one seed.
  cfg.adapt.seed = cfg.train.seed;
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate(const RunConfig& cfg) {
  if (cfg.manifest.has_value() == cfg.synthetic.has_value()) {
    throw ContractError("config: [dataset] needs exactly one of manifest or synthetic");
  }
  if (cfg.synthetic) validate(*cfg.synthetic);
  if (!(cfg.labeled_fraction >= 0.0 && cfg.labeled_fraction <= 1.0)) {
    throw ContractError("config: dataset.labels must be in [0, 1]");
  }
  validate(cfg.train);
  if (cfg.adapt.epochs == 0) throw ContractError("config: adapt.epochs must be positive");
  if (!(cfg.adapt.lr > 0.0)) throw ContractError("config: adapt.lr must be positive");
  if (!(cfg.adapt.val_fraction > 0.0 && cfg.adapt.val_fraction < 1.0)) {
    throw ContractError("config: adapt.val_fraction must be in (0, 1)");
  }
}

std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[dataset]\n";
  if (c.manifest) o << "manifest = " << c.manifest->string() << "\n";
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    o << "synthetic = true\n"
      << "num_classes = " << s.num_classes << "\n"
      << "videos_per_class = " << s.videos_per_class << "\n"
      << "frames_per_video = " << s.frames_per_video << "\n"
      << "width = " << s.width << "\n"
      << "height = " << s.height << "\n"
      << "drift = " << fmt(s.drift) << "\n"
      << "noise = " << fmt(s.noise) << "\n"
      << "frame_rate = " << fmt(s.frame_rate) << "\n"
      << "signal = " << fmt(s.signal) << "\n"
      << "structure_blobs = " << s.structure_blobs << "\n"
      << "structure = " << fmt(s.structure) << "\n"
      << "clutter_blobs = " << s.clutter_blobs << "\n"
      << "clutter = " << fmt(s.clutter) << "\n";
  }
  const auto& t = c.train;
  o << "seed = " << c.data_seed << "\n"
    << "labels = " << fmt(c.labeled_fraction) << "\n"
    << "samples_per_second = " << fmt(t.samples_per_second) << "\n\n";

  o << "[train]\n"
    << "epochs = " << t.epochs << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "lr = " << fmt(t.lr) << "\n"
    << "weight_decay = " << fmt(t.weight_decay) << "\n"
    << "lambda = " << fmt(t.lambda) << "\n"
    << "tau = " << fmt(t.tau) << "\n"
    << "seed = " << t.seed << "\n"
    << "eval_every = " << t.eval_every << "\n"
    << "val_fraction = " << fmt(t.val_fraction) << "\n"
    << "rep_dim = " << t.model.backbone.rep_dim << "\n"
    << "proj_hidden = " << t.model.proj_hidden << "\n"
    << "proj_dim = " << t.model.proj_dim << "\n\n";

  const auto& a = t.augment;
  o << "[spg]\n"
    << "alpha = " << fmt(t.alpha) << "\n"
    << "beta = " << fmt(t.beta) << "\n"
    << "crop_scale_min = " << fmt(a.crop_scale_min) << "\n"
    << "crop_scale_max = " << fmt(a.crop_scale_max) << "\n"
    << "flip_prob = " << fmt(a.flip_prob) << "\n"
    << "max_rotation = " << fmt(a.max_rotation) << "\n"
    << "brightness = " << fmt(a.brightness) << "\n"
    << "contrast = " << fmt(a.contrast) << "\n"
    << "output_size = " << a.output_size << "\n\n";

  o << "[ablation]\n"
    << "enable_I1 = " << fmt(t.ablation.pair_by_video) << "\n"
    << "enable_I2 = " << fmt(t.ablation.mixup) << "\n"
    << "enable_CE = " << fmt(t.ablation.supervised) << "\n\n";

  o << "[adapt]\n"
    << "mode = " << adapt_mode_name(c.adapt_mode) << "\n"
    << "epochs = " << c.adapt.epochs << "\n"
    << "lr = " << fmt(c.adapt.lr) << "\n"
    << "weight_decay = " << fmt(c.adapt.weight_decay) << "\n"
    << "val_fraction = " << fmt(c.adapt.val_fraction) << "\n\n";

  o << "[output]\n"
    << "dir = " << c.output_dir.string() << "\n";
  return o.str();
}

Ablation ablation_from_name(std::string_view name) {
  if (name == "none") return Ablation::vanilla();
  if (name == "i1") return {true, false, false};
  if (name == "i1i2") return {true, true, false};
  if (name == "full") return Ablation::full();
  throw ContractError("unknown ablation '" + std::string(name) + "' (expected none, i1, i1i2 or full)");
}

std::string ablation_name(const Ablation& a) {
  if (!a.pair_by_video && !a.mixup && !a.supervised) return "none";
  if (a.pair_by_video && !a.mixup && !a.supervised) return "i1";
  if (a.pair_by_video && a.mixup && !a.supervised) return "i1i2";
  if (a.pair_by_video && a.mixup && a.supervised) return "full";
  return std::string("custom(I1=") + fmt(a.pair_by_video) + ",I2=" + fmt(a.mixup) + ",CE=" + fmt(a.supervised) + ")";
}

AdaptMode adapt_mode_from_name(std::string_view name) {
  if (name == "linear_probe") return AdaptMode::kLinearProbe;
  if (name == "last_layers") return AdaptMode::kLastLayers;
  throw ContractError("unknown adapt mode '" + std::string(name) + "' (expected linear_probe or last_layers)");
}

void set_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.data_seed = seed;
  cfg.train.seed = seed;
  cfg.adapt.seed = seed;
}

}  // namespace uscl
