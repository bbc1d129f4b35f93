// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "satx/model.hpp"
#include "satx/video.hpp"

namespace satx {

struct TrainOptions {
  std::vector<int> hidden_widths{8};
  int epochs = 200;
  double learning_rate = 0.05;
  uint64_t seed = 7;
  FixedPointFormat weight_format{6, 3};
  FixedPointFormat activation_format{6, 3};
};

struct TrainResult {
  ModelSpec model;  // float weights; quantization formats recorded for later
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

// Deterministic seeded SGD on Flatten -> (Dense -> ReLU)* -> Dense over the
// extracted features of the train split, with a squared-hinge one-vs-all
// loss (no exponentials anywhere). Zero epochs returns the seeded initial
// weights unchanged. Throws TrainingError when the loss turns non-finite.
TrainResult train_model(const Dataset& dataset, const TrainOptions& options);

// Fraction of (features, label) pairs the float forward pass classifies
// correctly, argmax with lowest-index tie-break.
double float_accuracy(const ModelSpec& model,
                      const std::vector<std::pair<VideoFeatureSequence, int>>& samples);

// Same, through the bit-exact quantized pass.
double quantized_accuracy(
    const ModelSpec& model,
    const std::vector<std::pair<VideoFeatureSequence, int>>& samples);

// (features, label index) pairs for the given dataset indices.
std::vector<std::pair<VideoFeatureSequence, int>> labelled_features(
    const Dataset& dataset, const std::vector<int>& indices);

}  // namespace satx
