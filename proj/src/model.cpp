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

#include "uscl/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "uscl/errors.hpp"

namespace uscl {

using nd::Graph;
using nd::Tensor;
using nd::Var;

namespace {

struct SpatialDims {
  std::size_t channels, height, width;
};

// Returns dims after each conv+relu+pool stage; throws when a stage does not fit.
SpatialDims trace_stages(const BackboneConfig& b) {
  SpatialDims d{1, b.height, b.width};
  for (std::size_t i = 0; i < b.stages.size(); ++i) {
    const auto& s = b.stages[i];
    if (s.kernel == 0 || s.stride == 0 || s.out_channels == 0) {
      throw ContractError("conv stage " + std::to_string(i) + " has a zero kernel/stride/channel count");
    }
    if (s.kernel > d.height || s.kernel > d.width) {
      throw ContractError("conv stage " + std::to_string(i) + " kernel " + std::to_string(s.kernel) +
                          " exceeds its " + std::to_string(d.height) + "x" + std::to_string(d.width) + " input");
    }
    d.height = (d.height - s.kernel) / s.stride + 1;
    d.width = (d.width - s.kernel) / s.stride + 1;
    if (b.pool == 0 || d.height < b.pool || d.width < b.pool) {
      throw ContractError("pooling after conv stage " + std::to_string(i) + " does not fit");
    }
    d.height /= b.pool;
    d.width /= b.pool;
    d.channels = s.out_channels;
  }
  return d;
}

constexpr std::string_view kMetaName = "meta.config";
constexpr char kMagic[4] = {'U', 'S', 'C', 'L'};

}  // namespace

std::size_t BackboneConfig::feature_channels() const { return trace_stages(*this).channels; }
std::size_t BackboneConfig::feature_height() const { return trace_stages(*this).height; }
std::size_t BackboneConfig::feature_width() const { return trace_stages(*this).width; }

std::size_t BackboneConfig::flatten_size() const {
  const auto d = trace_stages(*this);
  return d.channels * d.height * d.width;
}

void validate(const ModelConfig& cfg) {
  if (cfg.backbone.height == 0 || cfg.backbone.width == 0) throw ContractError("backbone input must be non-empty");
  trace_stages(cfg.backbone);
  if (cfg.backbone.rep_dim == 0 || cfg.proj_hidden == 0 || cfg.proj_dim == 0 || cfg.num_classes == 0) {
    throw ContractError("model dimensions must be positive");
  }
}

// ---------------------------------------------------------------------------
// ModelParams

ModelParams::ModelParams(ModelConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const auto& b = cfg_.backbone;
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < b.stages.size(); ++i) {
    const auto& s = b.stages[i];
    const std::string prefix = "f.conv" + std::to_string(i);
    tensors_.push_back({prefix + ".w", Tensor::zeros({s.out_channels, in_ch, s.kernel, s.kernel})});
    tensors_.push_back({prefix + ".b", Tensor::zeros({s.out_channels})});
    in_ch = s.out_channels;
  }
  tensors_.push_back({"f.fc.w", Tensor::zeros({b.flatten_size(), b.rep_dim})});
  tensors_.push_back({"f.fc.b", Tensor::zeros({b.rep_dim})});
  tensors_.push_back({"g.fc1.w", Tensor::zeros({b.rep_dim, cfg_.proj_hidden})});
  tensors_.push_back({"g.fc1.b", Tensor::zeros({cfg_.proj_hidden})});
  tensors_.push_back({"g.fc2.w", Tensor::zeros({cfg_.proj_hidden, cfg_.proj_dim})});
  tensors_.push_back({"g.fc2.b", Tensor::zeros({cfg_.proj_dim})});
  tensors_.push_back({"h.w", Tensor::zeros({b.rep_dim, cfg_.num_classes})});
  tensors_.push_back({"h.b", Tensor::zeros({cfg_.num_classes})});
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p(cfg);
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : p.tensors_) {
    if (name.ends_with(".b")) continue;
    std::size_t fan_in = 1, fan_out = 1;
    if (t.rank() == 4) {
      fan_in = t.dim(1) * t.dim(2) * t.dim(3);
      fan_out = t.dim(0) * t.dim(2) * t.dim(3);
    } else {
      fan_in = t.dim(0);
      fan_out = t.dim(1);
    }
    // He-uniform in front of a relu, Glorot-uniform for the linear outputs.
    const bool feeds_relu = name.starts_with("f.conv") || name == "g.fc1.w";
    const double bound = feeds_relu ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                    : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : t.values()) v = u(rng);
  }
  return p;
}

Tensor& ModelParams::get(std::string_view name) {
  for (auto& nt : tensors_) {
    if (nt.name == name) return nt.tensor;
  }
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& nt : tensors_) {
    if (nt.name == name) return nt.tensor;
  }
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const NamedTensor& nt) { return nt.name == name; });
}

std::vector<Tensor*> ModelParams::group(ParamGroup g) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : tensors_) {
    bool in = false;
    switch (g) {
      case ParamGroup::kConv: in = name.starts_with("f.conv"); break;
      case ParamGroup::kBackboneFc: in = name.starts_with("f.fc"); break;
      case ParamGroup::kProjection: in = name.starts_with("g."); break;
      case ParamGroup::kClassifier: in = name.starts_with("h."); break;
    }
    if (in) out.push_back(&t);
  }
  return out;
}

std::vector<Tensor*> ModelParams::all() {
  std::vector<Tensor*> out;
  for (auto& nt : tensors_) out.push_back(&nt.tensor);
  return out;
}

void ModelParams::set_requires_grad(ParamGroup g, bool on) {
  for (auto* t : group(g)) t->set_requires_grad(on);
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& nt : tensors_) nt.tensor.set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& nt : tensors_) {
    nt.tensor.clear_grad();
    if (nt.tensor.requires_grad()) nt.tensor.mutable_grad();
  }
}

void ModelParams::reset_classifier(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes == 0) throw ContractError("classifier needs at least one class");
  cfg_.num_classes = num_classes;
  const std::size_t rep = cfg_.backbone.rep_dim;
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(rep + num_classes));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(rep * num_classes);
  for (auto& v : w) v = u(rng);
  get("h.w") = Tensor({rep, num_classes}, std::move(w));
  get("h.b") = Tensor::zeros({num_classes});
}

bool ModelParams::all_finite() const {
  for (const auto& nt : tensors_) {
    for (double v : nt.tensor.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward pieces

Tensor images_to_tensor(std::span<const Frame> images) {
  if (images.empty()) throw ContractError("empty image batch");
  const std::size_t w = images[0].width, h = images[0].height;
  std::vector<double> data;
  data.reserve(images.size() * w * h);
  for (const auto& img : images) {
    if (img.width != w || img.height != h) {
      throw ShapeError("image batch mixes sizes " + std::to_string(w) + "x" + std::to_string(h) + " and " +
                       std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return Tensor({images.size(), 1, h, w}, std::move(data));
}

std::vector<Frame> interleave_views(std::span<const Frame> first, std::span<const Frame> second) {
  if (first.size() != second.size()) throw ContractError("view lists differ in length");
  std::vector<Frame> out;
  out.reserve(2 * first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    out.push_back(first[i]);
    out.push_back(second[i]);
  }
  return out;
}

constexpr double kInputMean = 0.5;
constexpr double kInputStd = 0.25;

Var conv_features(Graph& g, ModelParams& p, Var images) {
  const auto& cfg = p.config().backbone;
  const nd::Shape shape = g.value(images).shape();
  if (shape.size() != 4 || shape[1] != 1 || shape[2] != cfg.height || shape[3] != cfg.width) {
    throw ShapeError("encode: expected images [B, 1, " + std::to_string(cfg.height) + ", " +
                     std::to_string(cfg.width) + "], got " + nd::shape_str(shape));
  }
  // Fixed input normalization: pixels in [0, 1] are centered on mid-gray.
  Var x = g.add(g.mul_scalar(images, 1.0 / kInputStd), g.constant(Tensor::filled({cfg.width}, -kInputMean / kInputStd)));
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const std::string prefix = "f.conv" + std::to_string(i);
    Var w = g.leaf(p.get(prefix + ".w"));
    Var b = g.leaf(p.get(prefix + ".b"));
    x = g.conv2d_valid(x, w, b, cfg.stages[i].stride);
    x = g.relu(x);
    x = g.max_pool2d(x, cfg.pool);
  }
  const std::size_t batch = shape[0];
  return g.reshape(x, {batch, cfg.flatten_size()});
}

Var backbone_fc(Graph& g, ModelParams& p, Var features) {
  const nd::Shape shape = g.value(features).shape();
  if (shape.size() != 2 || shape[1] != p.config().backbone.flatten_size()) {
    throw ShapeError("backbone fc: expected [B, " + std::to_string(p.config().backbone.flatten_size()) + "], got " +
                     nd::shape_str(shape));
  }
  return g.add(g.matmul(features, g.leaf(p.get("f.fc.w"))), g.leaf(p.get("f.fc.b")));
}

Var encode(Graph& g, ModelParams& p, Var images) { return backbone_fc(g, p, conv_features(g, p, images)); }

Var project(Graph& g, ModelParams& p, Var reps) {
  const nd::Shape shape = g.value(reps).shape();
  if (shape.size() != 2 || shape[1] != p.config().backbone.rep_dim) {
    throw ShapeError("project: expected [B, " + std::to_string(p.config().backbone.rep_dim) + "], got " +
                     nd::shape_str(shape));
  }
  Var hidden = g.relu(g.add(g.matmul(reps, g.leaf(p.get("g.fc1.w"))), g.leaf(p.get("g.fc1.b"))));
  return g.add(g.matmul(hidden, g.leaf(p.get("g.fc2.w"))), g.leaf(p.get("g.fc2.b")));
}

Var classify(Graph& g, ModelParams& p, Var reps) {
  const nd::Shape shape = g.value(reps).shape();
  if (shape.size() != 2 || shape[1] != p.get("h.w").dim(0)) {
    throw ShapeError("classify: expected [B, " + std::to_string(p.get("h.w").dim(0)) + "], got " +
                     nd::shape_str(shape));
  }
  Var logits = g.add(g.matmul(reps, g.leaf(p.get("h.w"))), g.leaf(p.get("h.b")));
  return g.softmax(logits, 1);
}

Tensor encode_frames(const ModelParams& p, std::span<const Frame> images) {
  ModelParams copy = p;
  copy.set_requires_grad(false);
  Graph g;
  Var x = g.constant(images_to_tensor(images));
  return g.value(encode(g, copy, x));
}

Tensor conv_features_of(const ModelParams& p, std::span<const Frame> images) {
  ModelParams copy = p;
  copy.set_requires_grad(false);
  Graph g;
  Var x = g.constant(images_to_tensor(images));
  return g.value(conv_features(g, copy, x));
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  template <typename T>
  T get(const char* what) {
    if (bytes.size() - pos < sizeof(T)) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos);
    }
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

Tensor config_tensor(const ModelConfig& cfg) {
  const auto& b = cfg.backbone;
  std::vector<double> v = {static_cast<double>(b.height),     static_cast<double>(b.width),
                           static_cast<double>(b.pool),       static_cast<double>(b.rep_dim),
                           static_cast<double>(cfg.proj_hidden), static_cast<double>(cfg.proj_dim),
                           static_cast<double>(cfg.num_classes), static_cast<double>(b.stages.size())};
  for (const auto& s : b.stages) {
    v.push_back(static_cast<double>(s.out_channels));
    v.push_back(static_cast<double>(s.kernel));
    v.push_back(static_cast<double>(s.stride));
  }
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

ModelConfig config_from_tensor(const Tensor& t) {
  auto at = [&](std::size_t i) -> std::size_t {
    if (i >= t.numel()) throw LoadError("checkpoint: malformed meta.config");
    const double v = t[i];
    if (!(v >= 0.0) || v != std::floor(v)) throw LoadError("checkpoint: malformed meta.config");
    return static_cast<std::size_t>(v);
  };
  ModelConfig cfg;
  cfg.backbone.height = at(0);
  cfg.backbone.width = at(1);
  cfg.backbone.pool = at(2);
  cfg.backbone.rep_dim = at(3);
  cfg.proj_hidden = at(4);
  cfg.proj_dim = at(5);
  cfg.num_classes = at(6);
  const std::size_t n = at(7);
  if (t.numel() != 8 + 3 * n) throw LoadError("checkpoint: malformed meta.config");
  cfg.backbone.stages.clear();
  for (std::size_t i = 0; i < n; ++i) cfg.backbone.stages.push_back({at(8 + 3 * i), at(9 + 3 * i), at(10 + 3 * i)});
  return cfg;
}

void put_tensor(std::vector<std::uint8_t>& out, std::string_view name, const Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint64_t>(out, d);
  for (double v : t.values()) put<double>(out, v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& p) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_tensor(out, kMetaName, config_tensor(p.config()));
  for (const auto& nt : p.tensors()) put_tensor(out, nt.name, nt.tensor);
  return out;
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw ParseError("checkpoint: bad magic, expected USCL", 0);
  }
  Reader r{bytes, 4};
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint version " + std::to_string(version) + " is not supported (this build reads version " +
                    std::to_string(kCheckpointVersion) + ")");
  }

  std::vector<NamedTensor> records;
  while (r.pos < bytes.size()) {
    const auto name_len = r.get<std::uint32_t>("name length");
    if (bytes.size() - r.pos < name_len) throw ParseError("checkpoint truncated in tensor name", r.pos);
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
    r.pos += name_len;
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw ParseError("checkpoint: bad rank for '" + name + "'", r.pos);
    nd::Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint64_t>("dims");
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw ParseError("checkpoint: bad dim for '" + name + "'", r.pos);
      shape.push_back(static_cast<std::size_t>(d));
      numel *= static_cast<std::size_t>(d);
    }
    if ((bytes.size() - r.pos) / sizeof(double) < numel) {
      throw ParseError("checkpoint truncated in payload of '" + name + "'", r.pos);
    }
    std::vector<double> values(numel);
    std::memcpy(values.data(), bytes.data() + r.pos, numel * sizeof(double));
    r.pos += numel * sizeof(double);
    records.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }

  if (records.empty() || records.front().name != kMetaName) throw LoadError("checkpoint: missing meta.config");
  ModelConfig cfg = config_from_tensor(records.front().tensor);
  ModelParams p(cfg);
  if (records.size() - 1 != p.tensors().size()) {
    throw LoadError("checkpoint holds " + std::to_string(records.size() - 1) + " tensors, model expects " +
                    std::to_string(p.tensors().size()));
  }
  for (std::size_t i = 1; i < records.size(); ++i) {
    auto& dst = p.get(records[i].name);
    if (dst.shape() != records[i].tensor.shape()) {
      throw LoadError("checkpoint tensor '" + records[i].name + "' has shape " +
                      nd::shape_str(records[i].tensor.shape()) + ", expected " + nd::shape_str(dst.shape()));
    }
    dst = std::move(records[i].tensor);
  }
  return p;
}

void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace uscl
