// SPDX-License-Identifier: Apache-2.0

#include "satx/train.hpp"

#include <cmath>
#include <random>

#include "satx/errors.hpp"

namespace satx {

namespace {

// rng() mapped to [0,1) with 53 exactly-representable bits.
double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct DenseGrad {
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
};

}  // namespace

std::vector<std::pair<VideoFeatureSequence, int>> labelled_features(
    const Dataset& dataset, const std::vector<int>& indices) {
  std::vector<std::pair<VideoFeatureSequence, int>> out;
  out.reserve(indices.size());
  for (int i : indices) {
    const SyntheticVideo& video = dataset.videos.at(i);
    out.emplace_back(extract_features(video), static_cast<int>(video.label));
  }
  return out;
}

TrainResult train_model(const Dataset& dataset, const TrainOptions& options) {
  if (dataset.videos.empty()) throw TrainingError("dataset is empty");
  if (options.epochs < 0) throw TrainingError("epochs must be >= 0");
  auto samples = labelled_features(dataset, dataset.train_indices);
  if (samples.empty()) throw TrainingError("train split is empty");

  const int feature_rows = samples.front().first.frames;
  const int feature_cols = samples.front().first.features;
  const int input_width = feature_rows * feature_cols;

  // Layer widths: input -> hidden... -> classes.
  std::vector<int> widths{input_width};
  for (int h : options.hidden_widths) {
    if (h < 1) throw TrainingError("hidden width must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(kNumLabels);

  std::mt19937_64 rng(options.seed);
  std::vector<DenseGrad> params(widths.size() - 1);
  for (std::size_t l = 0; l < params.size(); ++l) {
    int fan_in = widths[l];
    int fan_out = widths[l + 1];
    double scale = std::sqrt(6.0 / (fan_in + fan_out));
    params[l].weights.assign(fan_out, std::vector<double>(fan_in, 0.0));
    params[l].bias.assign(fan_out, 0.0);
    for (auto& row : params[l].weights)
      for (double& w : row) w = (2.0 * unit_double(rng) - 1.0) * scale;
  }

  const double lr = options.learning_rate;
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {  // Fisher-Yates, portable
      std::size_t j = rng() % (i + 1);
      std::swap(order[i], order[j]);
    }
    epoch_loss = 0.0;
    for (std::size_t s : order) {
      const auto& [features, label] = samples[s];
      // Forward, keeping pre-activations per layer.
      std::vector<std::vector<double>> acts{features.values};
      for (std::size_t l = 0; l < params.size(); ++l) {
        const auto& p = params[l];
        std::vector<double> z(p.bias);
        for (std::size_t j = 0; j < p.weights.size(); ++j)
          for (std::size_t k = 0; k < p.weights[j].size(); ++k)
            z[j] += p.weights[j][k] * acts.back()[k];
        if (l + 1 < params.size())
          for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
        acts.push_back(std::move(z));
      }
      // Squared hinge, one vs all: sum_c max(0, 1 - y_c s_c)^2.
      const auto& logits = acts.back();
      std::vector<double> delta(logits.size(), 0.0);
      for (std::size_t c = 0; c < logits.size(); ++c) {
        double y = static_cast<int>(c) == label ? 1.0 : -1.0;
        double margin = 1.0 - y * logits[c];
        if (margin > 0.0) {
          epoch_loss += margin * margin;
          delta[c] = -2.0 * y * margin;
        }
      }
      // Backprop and immediate SGD update.
      for (std::size_t l = params.size(); l-- > 0;) {
        auto& p = params[l];
        const auto& input = acts[l];
        std::vector<double> next_delta(input.size(), 0.0);
        for (std::size_t j = 0; j < p.weights.size(); ++j) {
          for (std::size_t k = 0; k < p.weights[j].size(); ++k) {
            next_delta[k] += p.weights[j][k] * delta[j];
            p.weights[j][k] -= lr * delta[j] * input[k];
          }
          p.bias[j] -= lr * delta[j];
        }
        if (l > 0) {
          // Through the hidden ReLU: gradient passes where the input was
          // positive (acts[l] is already post-activation).
          for (std::size_t k = 0; k < next_delta.size(); ++k)
            if (acts[l][k] <= 0.0) next_delta[k] = 0.0;
        }
        delta = std::move(next_delta);
      }
    }
    if (!std::isfinite(epoch_loss))
      throw TrainingError("training diverged (non-finite loss); try a smaller lr");
  }

  TrainResult result;
  result.model.input_frames = feature_rows;
  result.model.input_features = feature_cols;
  result.model.num_classes = kNumLabels;
  result.model.weight_format = options.weight_format;
  result.model.activation_format = options.activation_format;
  result.model.layers.push_back(FlattenLayer{});
  for (std::size_t l = 0; l < params.size(); ++l) {
    result.model.layers.push_back(
        DenseLayer{params[l].weights, params[l].bias});
    if (l + 1 < params.size()) result.model.layers.push_back(ReluLayer{});
  }
  result.model.validate();
  result.train_accuracy = float_accuracy(result.model, samples);
  result.final_loss = epoch_loss;
  return result;
}

double float_accuracy(const ModelSpec& model,
                      const std::vector<std::pair<VideoFeatureSequence, int>>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const auto& [features, label] : samples) {
    auto logits = float_forward(model, features);
    int best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = static_cast<int>(c);
    if (best == label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double quantized_accuracy(
    const ModelSpec& model,
    const std::vector<std::pair<VideoFeatureSequence, int>>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const auto& [features, label] : samples)
    if (predict(model, features) == label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace satx
