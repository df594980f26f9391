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

#include "uscl/spg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "uscl/errors.hpp"

namespace uscl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Frame blank_like(const Frame& f, std::size_t w, std::size_t h) {
  Frame out;
  out.width = w;
  out.height = h;
  out.index = f.index;
  out.pixels.assign(w * h, 0.0);
  return out;
}

// Bilinear sample with zero outside the image.
double sample_bilinear(const Frame& img, double sx, double sy) {
  const double max_x = static_cast<double>(img.width - 1);
  const double max_y = static_cast<double>(img.height - 1);
  constexpr double kSlack = 1e-9;
  if (sx < -kSlack || sy < -kSlack || sx > max_x + kSlack || sy > max_y + kSlack) return 0.0;
  sx = std::clamp(sx, 0.0, max_x);
  sy = std::clamp(sy, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - static_cast<double>(x0);
  const double fy = sy - static_cast<double>(y0);
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

void clamp_unit(Frame& f) {
  for (auto& p : f.pixels) p = std::clamp(p, 0.0, 1.0);
}

void check_same_dims(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ContractError("mixup: frame dimensions differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + ")");
  }
}

std::optional<std::vector<double>> mix_labels(const std::optional<std::vector<double>>& anchor,
                                              const std::optional<std::vector<double>>& other, double xi) {
  if (!anchor || !other) return std::nullopt;
  std::vector<double> y(anchor->size());
  for (std::size_t c = 0; c < y.size(); ++c) y[c] = xi * (*anchor)[c] + (1.0 - xi) * (*other)[c];
  return y;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::string_view video_id) {
  return splitmix64(splitmix64(splitmix64(seed) ^ epoch) ^ fnv1a(video_id));
}

std::size_t Batch::num_labeled() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const SamplePair& p) { return p.y.has_value(); }));
}

AugmentConfig AugmentConfig::identity(std::size_t side) {
  AugmentConfig c;
  c.crop_scale_min = 1.0;
  c.crop_scale_max = 1.0;
  c.flip_prob = 0.0;
  c.max_rotation = 0.0;
  c.brightness = 0.0;
  c.contrast = 0.0;
  c.output_size = side;
  return c;
}

void validate(const AugmentConfig& cfg) {
  if (!(cfg.crop_scale_min > 0.0 && cfg.crop_scale_min <= cfg.crop_scale_max && cfg.crop_scale_max <= 1.0)) {
    throw ContractError("augment: crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(cfg.flip_prob >= 0.0 && cfg.flip_prob <= 1.0)) throw ContractError("augment: flip_prob must lie in [0, 1]");
  if (!(cfg.max_rotation >= 0.0 && cfg.max_rotation <= 180.0)) {
    throw ContractError("augment: max_rotation must lie in [0, 180]");
  }
  if (!(cfg.brightness >= 0.0 && cfg.brightness <= 1.0)) throw ContractError("augment: brightness must lie in [0, 1]");
  if (!(cfg.contrast >= 0.0 && cfg.contrast < 1.0)) throw ContractError("augment: contrast must lie in [0, 1)");
  if (cfg.output_size == 0) throw ContractError("augment: output_size must be positive");
}

double sample_beta(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0 && beta > 0.0)) throw ContractError("Beta parameters must be positive");
  // X ~ Gamma(a), Y ~ Gamma(b)  =>  X / (X + Y) ~ Beta(a, b)
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

FrameTriplet sample_triplet(const FrameSet& fs, std::size_t num_classes, Rng& rng) {
  const std::size_t k = fs.frames.size();
  if (k < 3) {
    throw TooShortError("frame set '" + fs.video_id + "' has " + std::to_string(k) + " frames, need 3");
  }
  std::array<std::size_t, 3> pos{};
  // Floyd's algorithm: three distinct positions, uniform over subsets.
  std::size_t filled = 0;
  for (std::size_t j = k - 3; j < k; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    const bool seen = std::find(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(filled), t) !=
                      pos.begin() + static_cast<std::ptrdiff_t>(filled);
    pos[filled++] = seen ? j : t;
  }
  std::sort(pos.begin(), pos.end());

  FrameTriplet t;
  t.video_id = fs.video_id;
  t.label = fs.label ? one_hot(fs.label, num_classes) : std::nullopt;
  for (std::size_t i = 0; i < 3; ++i) {
    t.frames[i] = fs.frames[pos[i]];
    t.indices[i] = fs.frames[pos[i]].index;
  }
  return t;
}

MixedPair mix_pair(const FrameTriplet& t, double xi1, double xi2) {
  if (!(xi1 >= 0.0 && xi1 <= 1.0 && xi2 >= 0.0 && xi2 <= 1.0)) {
    throw ContractError("mixup coefficients must lie in [0, 1]");
  }
  const Frame& first = t.frames[0];
  const Frame& anchor = t.frames[1];
  const Frame& last = t.frames[2];
  check_same_dims(anchor, first);
  check_same_dims(anchor, last);

  MixedPair out;
  out.xi1 = xi1;
  out.xi2 = xi2;
  out.x1 = anchor;
  out.x2 = anchor;
  for (std::size_t i = 0; i < anchor.pixels.size(); ++i) {
    out.x1.pixels[i] = xi1 * anchor.pixels[i] + (1.0 - xi1) * first.pixels[i];
    out.x2.pixels[i] = xi2 * anchor.pixels[i] + (1.0 - xi2) * last.pixels[i];
  }
  // Every frame of a video carries the video label, so the label mix is a
  // convex combination of equal vectors.
  out.y1 = mix_labels(t.label, t.label, xi1);
  out.y2 = mix_labels(t.label, t.label, xi2);
  return out;
}

MixedPair mix_pair(const FrameTriplet& t, double alpha, double beta, Rng& rng) {
  const double xi1 = sample_beta(alpha, beta, rng);
  const double xi2 = sample_beta(alpha, beta, rng);
  return mix_pair(t, xi1, xi2);
}

// ---------------------------------------------------------------------------
// Augmentation

Frame crop_resize(const Frame& img, std::size_t x0, std::size_t y0, std::size_t crop_w, std::size_t crop_h,
                  std::size_t out_w, std::size_t out_h) {
  if (crop_w == 0 || crop_h == 0 || x0 + crop_w > img.width || y0 + crop_h > img.height) {
    throw ContractError("crop window outside image");
  }
  if (out_w == 0 || out_h == 0) throw ContractError("crop output must be non-empty");
  Frame out = blank_like(img, out_w, out_h);
  // Corner-aligned mapping: a full-size crop resized to the same size is the
  // identity.
  const double sx = out_w > 1 ? static_cast<double>(crop_w - 1) / static_cast<double>(out_w - 1) : 0.0;
  const double sy = out_h > 1 ? static_cast<double>(crop_h - 1) / static_cast<double>(out_h - 1) : 0.0;
  const double cx = out_w > 1 ? 0.0 : static_cast<double>(crop_w - 1) / 2.0;
  const double cy = out_h > 1 ? 0.0 : static_cast<double>(crop_h - 1) / 2.0;
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      out.pixels[y * out_w + x] =
          sample_bilinear(img, static_cast<double>(x0) + cx + sx * static_cast<double>(x),
                          static_cast<double>(y0) + cy + sy * static_cast<double>(y));
    }
  }
  return out;
}

Frame hflip(const Frame& img) {
  Frame out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) out.pixels[y * img.width + x] = img.at(img.width - 1 - x, y);
  }
  return out;
}

Frame rotate(const Frame& img, double degrees) {
  if (degrees == 0.0) return img;
  Frame out = blank_like(img, img.width, img.height);
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = static_cast<double>(img.width - 1) / 2.0;
  const double cy = static_cast<double>(img.height - 1) / 2.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      // Inverse rotation maps each output pixel back into the source.
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      out.pixels[y * img.width + x] = sample_bilinear(img, sx, sy);
    }
  }
  return out;
}

Frame adjust_brightness(const Frame& img, double delta) {
  Frame out = img;
  for (auto& p : out.pixels) p += delta;
  clamp_unit(out);
  return out;
}

Frame adjust_contrast(const Frame& img, double factor) {
  Frame out = img;
  const double mean =
      std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.pixels.size());
  for (auto& p : out.pixels) p = (p - mean) * factor + mean;
  clamp_unit(out);
  return out;
}

Frame augment(const Frame& img, const AugmentConfig& cfg, Rng& rng) {
  validate(cfg);
  if (cfg.output_size > img.width || cfg.output_size > img.height) {
    throw ContractError("augment: output size " + std::to_string(cfg.output_size) + " exceeds input " +
                        std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double area = cfg.crop_scale_min + (cfg.crop_scale_max - cfg.crop_scale_min) * unit(rng);
  const double side = std::sqrt(area);
  const auto cw = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(side * static_cast<double>(img.width))), 1, img.width);
  const auto ch = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(side * static_cast<double>(img.height))), 1, img.height);
  std::uniform_int_distribution<std::size_t> px(0, img.width - cw);
  std::uniform_int_distribution<std::size_t> py(0, img.height - ch);
  const std::size_t x0 = px(rng);
  const std::size_t y0 = py(rng);
  Frame out = crop_resize(img, x0, y0, cw, ch, cfg.output_size, cfg.output_size);

  if (unit(rng) < cfg.flip_prob) out = hflip(out);

  const double angle = cfg.max_rotation * (2.0 * unit(rng) - 1.0);
  if (cfg.max_rotation > 0.0) out = rotate(out, angle);

  const double delta = cfg.brightness * (2.0 * unit(rng) - 1.0);
  if (cfg.brightness > 0.0) out = adjust_brightness(out, delta);
  const double factor = 1.0 + cfg.contrast * (2.0 * unit(rng) - 1.0);
  if (cfg.contrast > 0.0) out = adjust_contrast(out, factor);

  clamp_unit(out);
  return out;
}

// ---------------------------------------------------------------------------
// Pairs and batches

SamplePair build_pair(const FrameSet& fs, std::size_t num_classes, const PairConfig& cfg, Rng& rng) {
  const FrameTriplet t = sample_triplet(fs, num_classes, rng);
  const MixedPair mixed =
      cfg.mixup ? mix_pair(t, cfg.alpha, cfg.beta, rng) : mix_pair(t, 1.0, 1.0);
  SamplePair p;
  p.video_id = fs.video_id;
  p.xi1 = mixed.xi1;
  p.xi2 = mixed.xi2;
  p.y = mixed.y1;
  p.x1 = augment(mixed.x1, cfg.augment, rng);
  p.x2 = augment(mixed.x2, cfg.augment, rng);
  return p;
}

Batch build_batch_for(std::span<const FrameSet> sets, std::span<const std::size_t> picks, std::size_t num_classes,
                      const PairConfig& cfg, std::uint64_t seed, std::size_t epoch) {
  Batch b;
  b.epoch = epoch;
  b.pairs.reserve(picks.size());
  for (std::size_t k : picks) {
    if (k >= sets.size()) throw ContractError("batch pick out of range");
    Rng stream(derive_seed(seed, epoch, sets[k].video_id));
    b.pairs.push_back(build_pair(sets[k], num_classes, cfg, stream));
  }
  for (std::size_t i = 0; i < b.pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < b.pairs.size(); ++j) {
      if (b.pairs[i].video_id == b.pairs[j].video_id) {
        throw ContractError("batch contains video '" + b.pairs[i].video_id + "' twice");
      }
    }
  }
  return b;
}

Batch build_batch(std::span<const FrameSet> sets, std::size_t n, std::size_t num_classes, const PairConfig& cfg,
                  Rng& rng) {
  if (n == 0) throw ContractError("batch size must be positive");
  if (n > sets.size()) {
    throw ContractError("batch size " + std::to_string(n) + " exceeds the " + std::to_string(sets.size()) +
                        " available videos");
  }
  std::vector<std::size_t> order(sets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n entries are a uniform draw without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(n);
  const std::uint64_t seed = rng();
  return build_batch_for(sets, order, num_classes, cfg, seed, 0);
}

Batch build_batch(const Dataset& ds, std::size_t n, const PairConfig& cfg, Rng& rng) {
  std::vector<FrameSet> sets;
  sets.reserve(ds.videos.size());
  for (const auto& v : ds.videos) {
    if (v.frames.size() < 3) throw TooShortError("video '" + v.id + "' has fewer than 3 frames");
    sets.push_back(FrameSet{v.id, v.frames, 1, v.label});
  }
  return build_batch(sets, n, ds.num_classes, cfg, rng);
}

Batch build_frame_batch(std::span<const FrameSet> sets, std::size_t n, std::size_t num_classes,
                        const PairConfig& cfg, Rng& rng) {
  // (set, frame) for every frame in the pool.
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t f = 0; f < sets[s].frames.size(); ++f) pool.emplace_back(s, f);
  }
  if (n == 0 || n > pool.size()) throw ContractError("frame batch size out of range");
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  Batch b;
  b.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [s, f] = pool[i];
    const FrameSet& fs = sets[s];
    if (cfg.mixup) {
      b.pairs.push_back(build_pair(fs, num_classes, cfg, rng));
      continue;
    }
    SamplePair p;
    p.video_id = fs.video_id;
    p.y = fs.label ? one_hot(fs.label, num_classes) : std::nullopt;
    p.x1 = augment(fs.frames[f], cfg.augment, rng);
    p.x2 = augment(fs.frames[f], cfg.augment, rng);
    b.pairs.push_back(std::move(p));
  }
  return b;
}

}  // namespace uscl
