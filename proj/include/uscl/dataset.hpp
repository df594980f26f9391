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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uscl {

// Grayscale image with pixels in [0, 1], row-major.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
  // Chronological position in the source video.
  std::size_t index = 0;

  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct Video {
  std::string id;
  std::vector<Frame> frames;
  std::optional<std::size_t> label;
  double frame_rate = 0.0;
};

// Evenly spaced subset of one video's frames.
struct FrameSet {
  std::string video_id;
  std::vector<Frame> frames;
  std::size_t source_interval = 1;
  std::optional<std::size_t> label;

  std::size_t size() const noexcept { return frames.size(); }
};

struct Dataset {
  std::vector<Video> videos;
  std::size_t num_classes = 0;
  double labeled_fraction = 1.0;

  std::size_t num_labeled() const;
  std::size_t num_frames() const;
};

// Throws ContractError / TooShortError if the video breaks its invariants
// (frame sizes, strictly increasing indices, pixel range, at least 3 frames).
void validate(const Video& video);
void validate(const Dataset& ds);

// Keeps every I-th frame, I = max(1, floor(frame_rate / samples_per_second)).
FrameSet extract_frame_set(const Video& video, double samples_per_second);
std::vector<FrameSet> extract_frame_sets(const Dataset& ds, double samples_per_second);

// Labels a seeded random subset of round(fraction * |videos|) of the labeled
// videos and clears the rest. Sets ds.labeled_fraction.
void mask_labels(Dataset& ds, double fraction, std::uint64_t seed);

// One-hot vector of length num_classes, or nullopt for unlabeled.
std::optional<std::vector<double>> one_hot(std::optional<std::size_t> label, std::size_t num_classes);

// --- PGM (binary P5, maxval 255) -------------------------------------------

Frame decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const Frame& frame);
Frame read_pgm(const std::filesystem::path& path);
void write_pgm(const Frame& frame, const std::filesystem::path& path);

// --- Manifest ---------------------------------------------------------------
//
// {"num_classes": int, "labeled_fraction": float,
//  "videos": [{"id": str, "label": int|null, "frame_rate": float,
//              "frames": [relative paths...]}]}
//
// Paths resolve against the manifest's directory. labeled_fraction < 1 masks
// labels with mask_labels(.., mask_seed).
Dataset load_manifest(const std::filesystem::path& path, std::uint64_t mask_seed = 0);

// Writes <dir>/<video id>/frame_XXXX.pgm and <dir>/manifest.json. Returns the
// manifest path.
std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir);

// --- Synthetic videos -------------------------------------------------------

struct SyntheticConfig {
  std::size_t num_classes = 3;
  std::size_t videos_per_class = 20;
  std::size_t frames_per_video = 20;
  std::size_t width = 32;
  std::size_t height = 32;
  // Max translation per frame, pixels.
  double drift = 1.0;
  // Half-width of the uniform per-pixel noise.
  double noise = 0.05;
  double frame_rate = 3.0;
  // Amplitude of the class grating around mid-gray.
  double signal = 0.4;
  // Per-video blobs that persist across frames and move with the drift:
  // count and peak amplitude (signed).
  std::size_t structure_blobs = 0;
  double structure = 0.0;
  // Transient blobs redrawn every frame: count and peak amplitude (signed).
  std::size_t clutter_blobs = 0;
  double clutter = 0.0;
};

void validate(const SyntheticConfig& cfg);

// Class c renders an oriented sinusoidal grating whose orientation and
// frequency depend only on c. Each video draws its own phase and a smooth
// oscillating drift path; every frame adds its own transient Gaussian blobs
// and pixel noise. Video ids are
// "c<class>_v<index>". Deterministic in (cfg, seed).
Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

// Pearson correlation of two equally sized frames.
double pixel_correlation(const Frame& a, const Frame& b);

}  // namespace uscl
