// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "satx/fixed_point.hpp"

namespace satx {

// weights[out][in]
struct DenseLayer {
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
};

struct ReluLayer {};

// Outputs 1 when the pre-activation is >= threshold, else 0.
struct ThresholdStepLayer {
  double threshold = 0.0;
};

// 1-D temporal convolution, stride 1, no padding. weights[tap][in][out].
struct TemporalConvLayer {
  int kernel_frames = 1;
  std::vector<std::vector<std::vector<double>>> weights;
  std::vector<double> bias;
};

struct FlattenLayer {};

using LayerSpec =
    std::variant<DenseLayer, ReluLayer, ThresholdStepLayer, TemporalConvLayer,
                 FlattenLayer>;

// Shape of the activation grid between layers: rows x cols. Dense layers
// require a flattened (1 x N) input; TemporalConv consumes rows as frames.
struct GridShape {
  int rows = 0;
  int cols = 0;
  bool operator==(const GridShape&) const = default;
};

struct ModelSpec {
  int input_frames = 0;
  int input_features = 0;
  int num_classes = 0;
  FixedPointFormat weight_format{6, 3};
  FixedPointFormat activation_format{6, 3};
  std::vector<LayerSpec> layers;

  // Shape after each layer; element 0 is the input shape. Throws
  // SchemaError naming the offending layer/field on any inconsistency.
  std::vector<GridShape> shapes() const;
  void validate() const { shapes(); }
};

// T x D grid of real-valued features, row-major.
struct VideoFeatureSequence {
  int frames = 0;
  int features = 0;
  std::vector<double> values;

  double at(int t, int d) const { return values.at(t * features + d); }
  double& at(int t, int d) { return values.at(t * features + d); }

  static VideoFeatureSequence zeros(int frames, int features) {
    return {frames, features, std::vector<double>(frames * features, 0.0)};
  }

  bool operator==(const VideoFeatureSequence&) const = default;
};

ModelSpec load_model(const std::string& path);
void save_model(const ModelSpec& model, const std::string& path);
std::string model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const std::string& text);

VideoFeatureSequence load_features(const std::string& path);
void save_features(const VideoFeatureSequence& features, const std::string& path);

// Real-valued reference pass.
std::vector<double> float_forward(const ModelSpec& model,
                                  const VideoFeatureSequence& input);

// Bit-exact quantized pass: inputs and weights are quantized, per-neuron
// products and sums are exact in widened formats, each compute layer
// requantizes to the activation format. This is the semantics the CNF
// encoding must reproduce exactly.
std::vector<QuantizedValue> quantized_forward(const ModelSpec& model,
                                              const VideoFeatureSequence& input);

// Argmax of the quantized logits; ties break to the lowest class index.
int predict(const ModelSpec& model, const VideoFeatureSequence& input);

int argmax_lowest(std::span<const Mantissa> values);

}  // namespace satx
