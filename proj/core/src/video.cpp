// SPDX-License-Identifier: Apache-2.0

#include "satx/video.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "satx/errors.hpp"

namespace satx {

using nlohmann::json;

std::string label_name(MotionLabel label) {
  switch (label) {
    case MotionLabel::Stationary: return "stationary";
    case MotionLabel::MoveRight: return "move-right";
    case MotionLabel::MoveUp: return "move-up";
    case MotionLabel::Jump: return "jump";
  }
  throw Error("unreachable label");
}

MotionLabel label_from_name(const std::string& name) {
  if (name == "stationary") return MotionLabel::Stationary;
  if (name == "move-right") return MotionLabel::MoveRight;
  if (name == "move-up") return MotionLabel::MoveUp;
  if (name == "jump") return MotionLabel::Jump;
  throw SchemaError("unknown label '" + name + "'");
}

std::vector<uint8_t> SyntheticVideo::frame_grid(int t) const {
  std::vector<uint8_t> grid(height * width, 0);
  auto [x, y] = positions.at(t);
  grid[(height - 1 - y) * width + x] = 1;
  return grid;
}

std::pair<int, int> motion_delta(MotionLabel label, int step, int total_steps) {
  switch (label) {
    case MotionLabel::Stationary: return {0, 0};
    case MotionLabel::MoveRight: return {1, 0};
    case MotionLabel::MoveUp: return {0, 1};
    case MotionLabel::Jump: {
      int up_steps = (total_steps + 1) / 2;
      return step < up_steps ? std::pair{0, 1} : std::pair{0, -1};
    }
  }
  throw Error("unreachable label");
}

SyntheticVideo make_video(MotionLabel label, int frames, int height, int width,
                          std::pair<int, int> start,
                          const std::vector<std::pair<int, int>>& jitter) {
  SyntheticVideo video;
  video.height = height;
  video.width = width;
  video.label = label;
  auto clip = [&](std::pair<int, int> p) {
    return std::pair{std::clamp(p.first, 0, width - 1),
                     std::clamp(p.second, 0, height - 1)};
  };
  std::pair<int, int> pos = clip(start);
  video.positions.push_back(pos);
  const int total_steps = frames - 1;
  for (int step = 0; step < total_steps; ++step) {
    auto [dx, dy] = motion_delta(label, step, total_steps);
    if (step < static_cast<int>(jitter.size())) {
      dx += jitter[step].first;
      dy += jitter[step].second;
    }
    pos = clip({pos.first + dx, pos.second + dy});
    video.positions.push_back(pos);
  }
  return video;
}

Dataset gen_videos(uint64_t seed, int count, int frames, int height, int width) {
  if (frames < 2) throw Error("gen_videos: need at least 2 frames");
  if (height < 4 || width < 4) throw Error("gen_videos: grid must be at least 4x4");
  Dataset dataset;
  dataset.seed = seed;
  dataset.frames = frames;
  dataset.height = height;
  dataset.width = width;
  std::mt19937_64 rng(seed);
  auto uniform_below = [&](int n) {
    return static_cast<int>(rng() % static_cast<uint64_t>(n));
  };
  for (int i = 0; i < count; ++i) {
    MotionLabel label = static_cast<MotionLabel>(i % kNumLabels);
    std::pair<int, int> start{uniform_below(width), uniform_below(height)};
    std::vector<std::pair<int, int>> jitter(frames - 1, {0, 0});
    for (auto& j : jitter) {
      if (uniform_below(10) == 0) {  // probability 0.1 per step
        int axis = uniform_below(2);
        int dir = uniform_below(2) == 0 ? 1 : -1;
        j = axis == 0 ? std::pair{dir, 0} : std::pair{0, dir};
      }
    }
    dataset.videos.push_back(make_video(label, frames, height, width, start, jitter));
    if (i % 5 == 4)
      dataset.test_indices.push_back(i);
    else
      dataset.train_indices.push_back(i);
  }
  return dataset;
}

VideoFeatureSequence extract_features(const SyntheticVideo& video) {
  const int steps = video.frames() - 1;
  VideoFeatureSequence seq = VideoFeatureSequence::zeros(steps, 2);
  for (int t = 0; t < steps; ++t) {
    auto [x0, y0] = video.positions[t];
    auto [x1, y1] = video.positions[t + 1];
    seq.at(t, 0) = static_cast<double>(x1 - x0) / (video.width - 1);
    seq.at(t, 1) = static_cast<double>(y1 - y0) / (video.height - 1);
  }
  return seq;
}

std::string rle_encode(const std::vector<uint8_t>& bits) {
  std::string out;
  uint8_t current = 0;
  std::size_t run = 0;
  auto flush = [&]() {
    if (!out.empty()) out.push_back(' ');
    out += std::to_string(run);
  };
  for (uint8_t b : bits) {
    if ((b != 0) == (current != 0)) {
      ++run;
    } else {
      flush();
      current = b;
      run = 1;
    }
  }
  flush();
  return out;
}

std::vector<uint8_t> rle_decode(const std::string& text, std::size_t expected_size) {
  std::vector<uint8_t> out;
  std::istringstream in(text);
  std::size_t run = 0;
  uint8_t value = 0;
  while (in >> run) {
    out.insert(out.end(), run, value);
    value = value ? 0 : 1;
  }
  if (!in.eof()) throw SchemaError("bad run-length string '" + text + "'");
  if (out.size() != expected_size)
    throw SchemaError("run-length string decodes to " + std::to_string(out.size()) +
                      " cells, expected " + std::to_string(expected_size));
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  json doc;
  doc["seed"] = dataset.seed;
  doc["frames"] = dataset.frames;
  doc["height"] = dataset.height;
  doc["width"] = dataset.width;
  doc["train_indices"] = dataset.train_indices;
  doc["test_indices"] = dataset.test_indices;
  json videos = json::array();
  for (const auto& video : dataset.videos) {
    json frames = json::array();
    for (int t = 0; t < video.frames(); ++t)
      frames.push_back(rle_encode(video.frame_grid(t)));
    videos.push_back({{"label", label_name(video.label)}, {"frames", frames}});
  }
  doc["videos"] = videos;
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << doc.dump(1) << '\n';
  if (!out.flush()) throw Error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError("dataset parse error: " + std::string(e.what()));
  }
  Dataset dataset;
  try {
    dataset.seed = doc.at("seed").get<uint64_t>();
    dataset.frames = doc.at("frames").get<int>();
    dataset.height = doc.at("height").get<int>();
    dataset.width = doc.at("width").get<int>();
    dataset.train_indices = doc.at("train_indices").get<std::vector<int>>();
    dataset.test_indices = doc.at("test_indices").get<std::vector<int>>();
    for (const auto& v : doc.at("videos")) {
      SyntheticVideo video;
      video.height = dataset.height;
      video.width = dataset.width;
      video.label = label_from_name(v.at("label").get<std::string>());
      for (const auto& frame : v.at("frames")) {
        auto grid = rle_decode(frame.get<std::string>(),
                               static_cast<std::size_t>(dataset.height) *
                                   static_cast<std::size_t>(dataset.width));
        int active = -1;
        for (std::size_t cell = 0; cell < grid.size(); ++cell) {
          if (!grid[cell]) continue;
          if (active >= 0)
            throw SchemaError("frame has more than one active cell");
          active = static_cast<int>(cell);
        }
        if (active < 0) throw SchemaError("frame has no active cell");
        int row = active / dataset.width;
        int col = active % dataset.width;
        video.positions.emplace_back(col, dataset.height - 1 - row);
      }
      if (video.frames() != dataset.frames)
        throw SchemaError("video frame count disagrees with dataset header");
      dataset.videos.push_back(std::move(video));
    }
  } catch (const json::exception& e) {
    throw SchemaError("dataset field error: " + std::string(e.what()));
  }
  return dataset;
}

}  // namespace satx
