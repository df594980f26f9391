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

#include "uscl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uscl/errors.hpp"

namespace uscl {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::size_t Dataset::num_labeled() const {
  return static_cast<std::size_t>(
      std::count_if(videos.begin(), videos.end(), [](const Video& v) { return v.label.has_value(); }));
}

std::size_t Dataset::num_frames() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.frames.size();
  return n;
}

void validate(const Video& video) {
  if (video.frames.size() < 3) {
    throw TooShortError("video '" + video.id + "' has " + std::to_string(video.frames.size()) +
                        " frames, at least 3 are required");
  }
  const auto& first = video.frames.front();
  if (first.width == 0 || first.height == 0) throw ContractError("video '" + video.id + "' has empty frames");
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const auto& f = video.frames[i];
    if (f.width != first.width || f.height != first.height) {
      throw ContractError("video '" + video.id + "': frame " + std::to_string(i) + " is " + std::to_string(f.width) +
                          "x" + std::to_string(f.height) + ", expected " + std::to_string(first.width) + "x" +
                          std::to_string(first.height));
    }
    if (f.pixels.size() != f.width * f.height) {
      throw ContractError("video '" + video.id + "': frame " + std::to_string(i) + " pixel count mismatch");
    }
    if (i > 0 && f.index <= video.frames[i - 1].index) {
      throw ContractError("video '" + video.id + "': frame indices must be strictly increasing");
    }
    for (double p : f.pixels) {
      if (!(p >= 0.0 && p <= 1.0)) throw ContractError("video '" + video.id + "': pixel outside [0, 1]");
    }
  }
}

void validate(const Dataset& ds) {
  if (ds.num_classes == 0) throw ContractError("dataset needs at least one class");
  for (const auto& v : ds.videos) {
    validate(v);
    if (v.label && *v.label >= ds.num_classes) {
      throw ContractError("video '" + v.id + "': label " + std::to_string(*v.label) + " >= num_classes " +
                          std::to_string(ds.num_classes));
    }
  }
}

FrameSet extract_frame_set(const Video& video, double samples_per_second) {
  if (!(samples_per_second >= 1.0)) throw ContractError("samples per second must be >= 1");
  if (!(video.frame_rate >= samples_per_second)) {
    throw ContractError("video '" + video.id + "': frame rate " + std::to_string(video.frame_rate) +
                        " Hz is below the requested " + std::to_string(samples_per_second) + " samples/s");
  }
  const auto interval =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(video.frame_rate / samples_per_second)));
  FrameSet fs;
  fs.video_id = video.id;
  fs.source_interval = interval;
  fs.label = video.label;
  for (std::size_t i = 0; i < video.frames.size(); i += interval) fs.frames.push_back(video.frames[i]);
  if (fs.frames.size() < 3) {
    throw TooShortError("video '" + video.id + "' yields only " + std::to_string(fs.frames.size()) +
                        " frames at interval " + std::to_string(interval));
  }
  return fs;
}

std::vector<FrameSet> extract_frame_sets(const Dataset& ds, double samples_per_second) {
  std::vector<FrameSet> out;
  out.reserve(ds.videos.size());
  for (const auto& v : ds.videos) out.push_back(extract_frame_set(v, samples_per_second));
  return out;
}

void mask_labels(Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ContractError("labeled fraction must lie in [0, 1]");
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    if (ds.videos[i].label) labeled.push_back(i);
  }
  const auto target = std::min<std::size_t>(
      labeled.size(), static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.videos.size()))));
  std::mt19937_64 rng(seed);
  std::shuffle(labeled.begin(), labeled.end(), rng);
  for (std::size_t k = target; k < labeled.size(); ++k) ds.videos[labeled[k]].label.reset();
  ds.labeled_fraction = fraction;
}

std::optional<std::vector<double>> one_hot(std::optional<std::size_t> label, std::size_t num_classes) {
  if (!label) return std::nullopt;
  if (*label >= num_classes) throw ContractError("label out of range");
  std::vector<double> y(num_classes, 0.0);
  y[*label] = 1.0;
  return y;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

struct HeaderReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw ParseError(std::string("PGM ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw ParseError(std::string("PGM: expected ") + what, start);
    return v;
  }
};

}  // namespace

Frame decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("PGM: bad magic, expected P5", 0);
  HeaderReader r{bytes, 2};
  Frame f;
  f.width = r.read_uint("width");
  f.height = r.read_uint("height");
  const std::size_t maxval_at = r.pos;
  const std::size_t maxval = r.read_uint("maxval");
  if (maxval != 255) throw ParseError("PGM: unsupported maxval " + std::to_string(maxval), maxval_at);
  if (f.width == 0 || f.height == 0) throw ParseError("PGM: zero dimension", maxval_at);
  if (r.pos >= bytes.size() || !std::isspace(bytes[r.pos])) throw ParseError("PGM: missing header terminator", r.pos);
  const std::size_t data_at = r.pos + 1;
  const std::size_t n = f.width * f.height;
  if (bytes.size() - data_at < n) {
    throw ParseError("PGM: truncated payload, expected " + std::to_string(n) + " bytes", bytes.size());
  }
  f.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.pixels[i] = static_cast<double>(bytes[data_at + i]) / 255.0;
  return f;
}

std::vector<std::uint8_t> encode_pgm(const Frame& frame) {
  if (frame.pixels.size() != frame.width * frame.height) throw ContractError("frame pixel count mismatch");
  const std::string header =
      "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + frame.pixels.size());
  for (double p : frame.pixels) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
  }
  return out;
}

Frame read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pgm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_pgm(const Frame& frame, const fs::path& path) {
  const auto bytes = encode_pgm(frame);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

Dataset load_manifest(const fs::path& path, std::uint64_t mask_seed) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError("manifest " + path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.num_classes = doc.at("num_classes").get<std::size_t>();
    const double fraction = doc.value("labeled_fraction", 1.0);
    const fs::path root = path.parent_path();
    for (const auto& jv : doc.at("videos")) {
      Video v;
      v.id = jv.at("id").get<std::string>();
      v.frame_rate = jv.at("frame_rate").get<double>();
      if (jv.contains("label") && !jv.at("label").is_null()) {
        const auto label = jv.at("label").get<std::size_t>();
        if (label >= ds.num_classes) {
          throw LoadError("video '" + v.id + "': label " + std::to_string(label) + " >= num_classes " +
                          std::to_string(ds.num_classes));
        }
        v.label = label;
      }
      std::size_t idx = 0;
      for (const auto& jf : jv.at("frames")) {
        const fs::path fp = root / jf.get<std::string>();
        if (!fs::exists(fp)) throw LoadError("video '" + v.id + "': missing frame file " + fp.string());
        Frame f;
        try {
          f = read_pgm(fp);
        } catch (const std::exception& e) {
          throw LoadError("video '" + v.id + "': " + e.what());
        }
        f.index = idx++;
        if (!v.frames.empty() && (f.width != v.frames[0].width || f.height != v.frames[0].height)) {
          throw LoadError("video '" + v.id + "': inconsistent frame size in " + fp.string());
        }
        v.frames.push_back(std::move(f));
      }
      try {
        validate(v);
      } catch (const std::exception& e) {
        throw LoadError(e.what());
      }
      ds.videos.push_back(std::move(v));
    }
    if (fraction < 1.0) {
      mask_labels(ds, fraction, mask_seed);
    } else {
      ds.labeled_fraction = fraction;
    }
  } catch (const json::exception& e) {
    throw LoadError("manifest " + path.string() + ": " + e.what());
  }
  return ds;
}

fs::path save_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json videos = json::array();
  for (const auto& v : ds.videos) {
    const fs::path vdir = dir / v.id;
    fs::create_directories(vdir, ec);
    if (ec) throw IoError("cannot create " + vdir.string() + ": " + ec.message());
    json frames = json::array();
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      std::ostringstream name;
      name << "frame_" << std::setw(4) << std::setfill('0') << i << ".pgm";
      write_pgm(v.frames[i], vdir / name.str());
      frames.push_back(v.id + "/" + name.str());
    }
    json jv = {{"id", v.id}, {"frame_rate", v.frame_rate}, {"frames", frames}};
    jv["label"] = v.label ? json(*v.label) : json(nullptr);
    videos.push_back(std::move(jv));
  }
  json doc = {{"num_classes", ds.num_classes}, {"labeled_fraction", ds.labeled_fraction}, {"videos", videos}};
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + manifest.string());
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic videos

void validate(const SyntheticConfig& cfg) {
  if (cfg.num_classes < 1 || cfg.videos_per_class < 1) throw ContractError("synthetic: counts must be >= 1");
  if (cfg.frames_per_video < 3) throw ContractError("synthetic: frames_per_video must be >= 3");
  if (cfg.width < 8 || cfg.height < 8) throw ContractError("synthetic: width and height must be >= 8");
  if (!(cfg.drift >= 0.0) || !(cfg.noise >= 0.0)) throw ContractError("synthetic: drift and noise must be >= 0");
  if (!(cfg.frame_rate > 0.0)) throw ContractError("synthetic: frame_rate must be positive");
  if (!(cfg.signal >= 0.0) || !(cfg.clutter >= 0.0) || !(cfg.structure >= 0.0)) {
    throw ContractError("synthetic: signal, structure and clutter must be >= 0");
  }
}

namespace {

struct Grating {
  double orientation;  // radians
  double cycles;       // per image width
};

Grating class_grating(std::size_t c, std::size_t num_classes) {
  return {std::numbers::pi * (static_cast<double>(c) + 0.25) / static_cast<double>(num_classes),
          2.0 + 1.5 * static_cast<double>(c % 3)};
}

struct Blob {
  double cx, cy, sigma, amp;
};

struct Wave {
  double kx, ky, phase, ox, oy;
};

Frame render_frame(const SyntheticConfig& cfg, const Wave& wave, const std::vector<Blob>& fixed,
                   const std::vector<Blob>& blobs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Frame f;
  f.width = cfg.width;
  f.height = cfg.height;
  f.pixels.resize(cfg.width * cfg.height);
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      const double u = static_cast<double>(x) - wave.ox;
      const double q = static_cast<double>(y) - wave.oy;
      double p = 0.5 + cfg.signal * std::sin(wave.kx * u + wave.ky * q + wave.phase);
      for (const auto& b : fixed) {
        const double dx = u - b.cx;
        const double dy = q - b.cy;
        p += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      for (const auto& b : blobs) {
        const double dx = static_cast<double>(x) - b.cx;
        const double dy = static_cast<double>(y) - b.cy;
        p += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      if (cfg.noise > 0.0) p += cfg.noise * (2.0 * unit(rng) - 1.0);
      f.pixels[y * cfg.width + x] = std::clamp(p, 0.0, 1.0);
    }
  }
  return f;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.labeled_fraction = 1.0;
  const double w = static_cast<double>(cfg.width);

  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    const Grating gr = class_grating(c, cfg.num_classes);
    const double kx = two_pi * gr.cycles * std::cos(gr.orientation) / w;
    const double ky = two_pi * gr.cycles * std::sin(gr.orientation) / w;
    for (std::size_t vi = 0; vi < cfg.videos_per_class; ++vi) {
      Video v;
      v.id = "c" + std::to_string(c) + "_v" + std::to_string(vi);
      v.label = c;
      v.frame_rate = cfg.frame_rate;

      const double phase = two_pi * unit(rng);
      // Oscillating drift path o(t) = R (cos(wt + a), sin(wt + b)); per-frame
      // displacement is bounded by R * w = drift.
      const double omega = 0.5;
      const double radius = cfg.drift / omega;
      const double ax = two_pi * unit(rng);
      const double ay = two_pi * unit(rng);
      std::vector<Blob> fixed(cfg.structure_blobs);
      for (auto& bl : fixed) {
        bl.cx = w * unit(rng);
        bl.cy = static_cast<double>(cfg.height) * unit(rng);
        bl.sigma = 1.5 + 2.5 * unit(rng);
        bl.amp = cfg.structure * (unit(rng) < 0.5 ? -1.0 : 1.0);
      }

      for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
        const double tt = static_cast<double>(t);
        const double ox = radius * std::cos(omega * tt + ax);
        const double oy = radius * std::sin(omega * tt + ay);
        std::vector<Blob> blobs(cfg.clutter_blobs);
        for (auto& bl : blobs) {
          bl.cx = w * unit(rng);
          bl.cy = static_cast<double>(cfg.height) * unit(rng);
          bl.sigma = 1.5 + 2.5 * unit(rng);
          bl.amp = cfg.clutter * (unit(rng) < 0.5 ? -1.0 : 1.0);
        }
        Frame f = render_frame(cfg, {kx, ky, phase, ox, oy}, fixed, blobs, rng);
        f.index = t;
        v.frames.push_back(std::move(f));
      }
      ds.videos.push_back(std::move(v));
    }
  }
  return ds;
}

double pixel_correlation(const Frame& a, const Frame& b) {
  if (a.pixels.size() != b.pixels.size()) throw ContractError("pixel_correlation: frame sizes differ");
  const double n = static_cast<double>(a.pixels.size());
  const double ma = std::accumulate(a.pixels.begin(), a.pixels.end(), 0.0) / n;
  const double mb = std::accumulate(b.pixels.begin(), b.pixels.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double da = a.pixels[i] - ma, db = b.pixels[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace uscl
