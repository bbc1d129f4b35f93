// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satx/model.hpp"

namespace satx {

enum class MotionLabel : uint8_t { Stationary, MoveRight, MoveUp, Jump };

std::string label_name(MotionLabel label);
MotionLabel label_from_name(const std::string& name);
constexpr int kNumLabels = 4;

// T frames of an HxW binary grid with exactly one active cell per frame.
// Positions are (x, y) with x in [0,W) and y in [0,H); "up" is +y.
struct SyntheticVideo {
  int height = 0;
  int width = 0;
  MotionLabel label = MotionLabel::Stationary;
  std::vector<std::pair<int, int>> positions;  // one per frame

  int frames() const { return static_cast<int>(positions.size()); }
  // Row-major grid of frame t; row r corresponds to y = height-1-r.
  std::vector<uint8_t> frame_grid(int t) const;
};

struct Dataset {
  uint64_t seed = 0;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<SyntheticVideo> videos;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};

// Template step for a label at step index `step` out of `total_steps`.
std::pair<int, int> motion_delta(MotionLabel label, int step, int total_steps);

// Renders one trajectory: start position, template steps, plus the given
// per-step jitter offsets (may be empty), clipped to the grid.
SyntheticVideo make_video(MotionLabel label, int frames, int height, int width,
                          std::pair<int, int> start,
                          const std::vector<std::pair<int, int>>& jitter);

// Deterministic dataset: labels round-robin, uniform start positions, and
// with probability 0.1 per step one extra +-1 on a single axis. Every fifth
// video lands in the test split.
Dataset gen_videos(uint64_t seed, int count, int frames, int height, int width);

// Per consecutive frame pair, centroid displacement (dx, dy) scaled into
// [-1,1] by the grid extent: a (T-1) x 2 feature grid.
VideoFeatureSequence extract_features(const SyntheticVideo& video);

// Structured-text dataset file; frames stored as run-length strings.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Run-length coding of a binary grid row-major: counts of alternating runs
// starting with zeros, space separated ("12 1 51" = 12 zeros, 1 one, ...).
std::string rle_encode(const std::vector<uint8_t>& bits);
std::vector<uint8_t> rle_decode(const std::string& text, std::size_t expected_size);

}  // namespace satx
