// SPDX-License-Identifier: Apache-2.0

#include "satx/model.hpp"

#include <array>
#include <cassert>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "satx/errors.hpp"
#include "satx/strings.hpp"

namespace satx {

namespace {

using nlohmann::json;

std::string layer_tag(std::size_t index) {
  return "layer " + std::to_string(index);
}

}  // namespace

std::vector<GridShape> ModelSpec::shapes() const {
  if (input_frames < 1) throw SchemaError("input_frames must be >= 1");
  if (input_features < 1) throw SchemaError("input_features must be >= 1");
  if (num_classes < 1) throw SchemaError("num_classes must be >= 1");
  std::vector<GridShape> out;
  out.push_back({input_frames, input_features});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    GridShape cur = out.back();
    const LayerSpec& layer = layers[i];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      if (cur.rows != 1)
        throw SchemaError("dense layer on unflattened input, " + layer_tag(i));
      int out_w = static_cast<int>(dense->weights.size());
      if (out_w < 1) throw SchemaError("empty weight matrix, " + layer_tag(i));
      for (const auto& row : dense->weights)
        if (static_cast<int>(row.size()) != cur.cols)
          throw SchemaError("weight row length mismatch, " + layer_tag(i));
      if (static_cast<int>(dense->bias.size()) != out_w)
        throw SchemaError("bias length mismatch, " + layer_tag(i));
      out.push_back({1, out_w});
    } else if (std::holds_alternative<ReluLayer>(layer) ||
               std::holds_alternative<ThresholdStepLayer>(layer)) {
      out.push_back(cur);
    } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
      if (conv->kernel_frames < 1)
        throw SchemaError("kernel_frames must be >= 1, " + layer_tag(i));
      if (cur.rows < conv->kernel_frames)
        throw SchemaError("kernel larger than remaining frames, " + layer_tag(i));
      if (static_cast<int>(conv->weights.size()) != conv->kernel_frames)
        throw SchemaError("kernel tap count mismatch, " + layer_tag(i));
      int out_w = -1;
      for (const auto& tap : conv->weights) {
        if (static_cast<int>(tap.size()) != cur.cols)
          throw SchemaError("kernel input width mismatch, " + layer_tag(i));
        for (const auto& row : tap) {
          if (out_w < 0) out_w = static_cast<int>(row.size());
          if (static_cast<int>(row.size()) != out_w)
            throw SchemaError("kernel output width mismatch, " + layer_tag(i));
        }
      }
      if (out_w < 1) throw SchemaError("empty kernel, " + layer_tag(i));
      if (static_cast<int>(conv->bias.size()) != out_w)
        throw SchemaError("bias length mismatch, " + layer_tag(i));
      out.push_back({cur.rows - conv->kernel_frames + 1, out_w});
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      out.push_back({1, cur.rows * cur.cols});
    } else {
      throw SchemaError("unknown layer kind, " + layer_tag(i));
    }
  }
  GridShape final = out.back();
  if (final.rows != 1 || final.cols != num_classes)
    throw SchemaError("final layer width " + std::to_string(final.rows * final.cols) +
                      " does not equal num_classes " + std::to_string(num_classes));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Reals are stored as decimal strings so files never depend
// on platform float formatting.

namespace {

json reals_to_json(const std::vector<double>& xs) {
  json arr = json::array();
  for (double x : xs) arr.push_back(real_to_string(x));
  return arr;
}

std::vector<double> reals_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw SchemaError("expected array, " + where);
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_string()) throw SchemaError("reals must be decimal strings, " + where);
    out.push_back(real_from_string(v.get<std::string>()));
  }
  return out;
}

json format_to_json(FixedPointFormat fmt) {
  return json{{"bits", fmt.total_bits}, {"frac", fmt.frac_bits}};
}

FixedPointFormat format_from_json(const json& j, const std::string& where) {
  try {
    return storage_format(j.at("bits").get<int>(), j.at("frac").get<int>());
  } catch (const json::exception& e) {
    throw SchemaError("bad format object, " + where + ": " + e.what());
  }
}

json layer_to_json(const LayerSpec& layer) {
  json out;
  if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
    out["type"] = "dense";
    out["out"] = dense->weights.size();
    out["in"] = dense->weights.empty() ? 0 : dense->weights.front().size();
    std::vector<double> flat;
    for (const auto& row : dense->weights)
      flat.insert(flat.end(), row.begin(), row.end());
    out["weights"] = reals_to_json(flat);
    out["bias"] = reals_to_json(dense->bias);
  } else if (std::holds_alternative<ReluLayer>(layer)) {
    out["type"] = "relu";
  } else if (const auto* step = std::get_if<ThresholdStepLayer>(&layer)) {
    out["type"] = "threshold_step";
    out["threshold"] = real_to_string(step->threshold);
  } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
    out["type"] = "temporal_conv";
    out["kernel_frames"] = conv->kernel_frames;
    out["in"] = conv->weights.empty() ? 0 : conv->weights.front().size();
    out["out"] = conv->bias.size();
    std::vector<double> flat;
    for (const auto& tap : conv->weights)
      for (const auto& row : tap) flat.insert(flat.end(), row.begin(), row.end());
    out["weights"] = reals_to_json(flat);
    out["bias"] = reals_to_json(conv->bias);
  } else {
    out["type"] = "flatten";
  }
  return out;
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
  const std::string where = layer_tag(index);
  std::string type;
  try {
    type = j.at("type").get<std::string>();
  } catch (const json::exception&) {
    throw SchemaError("missing layer type, " + where);
  }
  try {
    if (type == "dense") {
      std::size_t out_w = j.at("out").get<std::size_t>();
      std::size_t in_w = j.at("in").get<std::size_t>();
      auto flat = reals_from_json(j.at("weights"), where);
      if (flat.size() != out_w * in_w)
        throw SchemaError("weights length mismatch, " + where);
      DenseLayer dense;
      dense.weights.resize(out_w);
      for (std::size_t r = 0; r < out_w; ++r)
        dense.weights[r].assign(flat.begin() + r * in_w,
                                flat.begin() + (r + 1) * in_w);
      dense.bias = reals_from_json(j.at("bias"), where);
      return dense;
    }
    if (type == "relu") return ReluLayer{};
    if (type == "threshold_step") {
      ThresholdStepLayer step;
      step.threshold = real_from_string(j.at("threshold").get<std::string>());
      return step;
    }
    if (type == "temporal_conv") {
      TemporalConvLayer conv;
      conv.kernel_frames = j.at("kernel_frames").get<int>();
      std::size_t in_w = j.at("in").get<std::size_t>();
      std::size_t out_w = j.at("out").get<std::size_t>();
      auto flat = reals_from_json(j.at("weights"), where);
      if (conv.kernel_frames < 1 ||
          flat.size() != static_cast<std::size_t>(conv.kernel_frames) * in_w * out_w)
        throw SchemaError("weights length mismatch, " + where);
      conv.weights.resize(conv.kernel_frames);
      std::size_t pos = 0;
      for (auto& tap : conv.weights) {
        tap.resize(in_w);
        for (auto& row : tap) {
          row.assign(flat.begin() + pos, flat.begin() + pos + out_w);
          pos += out_w;
        }
      }
      conv.bias = reals_from_json(j.at("bias"), where);
      return conv;
    }
    if (type == "flatten") return FlattenLayer{};
  } catch (const json::exception& e) {
    throw SchemaError("bad layer object, " + where + ": " + e.what());
  }
  throw SchemaError("unknown layer type '" + type + "', " + where);
}

}  // namespace

std::string model_to_json(const ModelSpec& model) {
  json doc;
  doc["input_frames"] = model.input_frames;
  doc["input_features"] = model.input_features;
  doc["num_classes"] = model.num_classes;
  doc["quantization"] = {{"weights", format_to_json(model.weight_format)},
                         {"activations", format_to_json(model.activation_format)}};
  json layers = json::array();
  for (const auto& layer : model.layers) layers.push_back(layer_to_json(layer));
  doc["layers"] = layers;
  return doc.dump(1) + "\n";
}

ModelSpec model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError("model parse error: " + std::string(e.what()));
  }
  ModelSpec model;
  try {
    model.input_frames = doc.at("input_frames").get<int>();
    model.input_features = doc.at("input_features").get<int>();
    model.num_classes = doc.at("num_classes").get<int>();
    const json& q = doc.at("quantization");
    model.weight_format = format_from_json(q.at("weights"), "quantization.weights");
    model.activation_format =
        format_from_json(q.at("activations"), "quantization.activations");
    const json& layers = doc.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i)
      model.layers.push_back(layer_from_json(layers[i], i));
  } catch (const json::exception& e) {
    throw SchemaError("model field error: " + std::string(e.what()));
  }
  model.validate();
  return model;
}

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void save_model(const ModelSpec& model, const std::string& path) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << model_to_json(model);
  if (!out.flush()) throw Error("write failed: " + path);
}

VideoFeatureSequence load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError("features parse error: " + std::string(e.what()));
  }
  VideoFeatureSequence seq;
  try {
    seq.frames = doc.at("frames").get<int>();
    seq.features = doc.at("features").get<int>();
    const json& rows = doc.at("values");
    for (std::size_t t = 0; t < rows.size(); ++t) {
      auto row = reals_from_json(rows[t], "values row " + std::to_string(t));
      if (static_cast<int>(row.size()) != seq.features)
        throw SchemaError("features row " + std::to_string(t) + " has wrong width");
      seq.values.insert(seq.values.end(), row.begin(), row.end());
    }
    if (static_cast<int>(rows.size()) != seq.frames)
      throw SchemaError("features row count disagrees with frames");
  } catch (const json::exception& e) {
    throw SchemaError("features field error: " + std::string(e.what()));
  }
  return seq;
}

void save_features(const VideoFeatureSequence& features, const std::string& path) {
  json doc;
  doc["frames"] = features.frames;
  doc["features"] = features.features;
  json rows = json::array();
  for (int t = 0; t < features.frames; ++t) {
    json row = json::array();
    for (int d = 0; d < features.features; ++d)
      row.push_back(real_to_string(features.at(t, d)));
    rows.push_back(row);
  }
  doc["values"] = rows;
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << doc.dump(1) << '\n';
  if (!out.flush()) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Forward passes.

namespace {

void check_input_shape(const ModelSpec& model, const VideoFeatureSequence& input) {
  if (input.frames != model.input_frames || input.features != model.input_features)
    throw SchemaError("input shape " + std::to_string(input.frames) + "x" +
                      std::to_string(input.features) + " does not match model " +
                      std::to_string(model.input_frames) + "x" +
                      std::to_string(model.input_features));
}

}  // namespace

std::vector<double> float_forward(const ModelSpec& model,
                                  const VideoFeatureSequence& input) {
  check_input_shape(model, input);
  auto shapes = model.shapes();
  std::vector<double> act = input.values;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    GridShape in_shape = shapes[i];
    GridShape out_shape = shapes[i + 1];
    const LayerSpec& layer = model.layers[i];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      std::vector<double> next(out_shape.cols, 0.0);
      for (int j = 0; j < out_shape.cols; ++j) {
        double acc = dense->bias[j];
        for (int k = 0; k < in_shape.cols; ++k) acc += dense->weights[j][k] * act[k];
        next[j] = acc;
      }
      act = std::move(next);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (double& v : act) v = v > 0.0 ? v : 0.0;
    } else if (const auto* step = std::get_if<ThresholdStepLayer>(&layer)) {
      for (double& v : act) v = v >= step->threshold ? 1.0 : 0.0;
    } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
      std::vector<double> next(out_shape.rows * out_shape.cols, 0.0);
      for (int t = 0; t < out_shape.rows; ++t) {
        for (int j = 0; j < out_shape.cols; ++j) {
          double acc = conv->bias[j];
          for (int tap = 0; tap < conv->kernel_frames; ++tap)
            for (int k = 0; k < in_shape.cols; ++k)
              acc += conv->weights[tap][k][j] * act[(t + tap) * in_shape.cols + k];
          next[t * out_shape.cols + j] = acc;
        }
      }
      act = std::move(next);
    }
    // Flatten: row-major storage already matches.
  }
  return act;
}

std::vector<QuantizedValue> quantized_forward(const ModelSpec& model,
                                              const VideoFeatureSequence& input) {
  check_input_shape(model, input);
  auto shapes = model.shapes();
  const FixedPointFormat act_fmt = model.activation_format;
  const FixedPointFormat w_fmt = model.weight_format;

  std::vector<QuantizedValue> act;
  act.reserve(input.values.size());
  for (double v : input.values) act.push_back(quantize(v, act_fmt));

  // Widening must leave every intermediate in range; a violation here is an
  // encoder-semantics bug, so it stays checked in release builds too.
  auto check_width = [](const QuantizedValue& q) {
    if (q.mantissa < q.format.min_mantissa() || q.mantissa > q.format.max_mantissa())
      throw Error("quantized_forward: intermediate escaped its widened format");
  };

  // Dot product with exact widened intermediates, mirrored bit for bit by
  // the circuit encoder: per-term widened_mul, widened_sum over the term
  // list, bias quantized into the accumulator format, one extra exact add,
  // then requantize to the activation format.
  auto neuron = [&](std::span<const QuantizedValue> terms, double bias) {
    FixedPointFormat term_fmt = widened_mul_format(w_fmt, act_fmt);
    QuantizedValue acc = widened_sum(terms, term_fmt);
    check_width(acc);
    QuantizedValue bias_q = quantize(bias, acc.format);
    std::array<QuantizedValue, 2> with_bias{acc, bias_q};
    QuantizedValue total = widened_sum(with_bias, acc.format);
    check_width(total);
    return requantize(total, act_fmt);
  };

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    GridShape in_shape = shapes[i];
    GridShape out_shape = shapes[i + 1];
    const LayerSpec& layer = model.layers[i];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      std::vector<QuantizedValue> next;
      next.reserve(out_shape.cols);
      for (int j = 0; j < out_shape.cols; ++j) {
        std::vector<QuantizedValue> terms;
        terms.reserve(in_shape.cols);
        for (int k = 0; k < in_shape.cols; ++k)
          terms.push_back(widened_mul(quantize(dense->weights[j][k], w_fmt), act[k]));
        next.push_back(neuron(terms, dense->bias[j]));
      }
      act = std::move(next);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (auto& q : act)
        if (q.mantissa < 0) q.mantissa = 0;
    } else if (const auto* step = std::get_if<ThresholdStepLayer>(&layer)) {
      QuantizedValue thr = quantize(step->threshold, act_fmt);
      QuantizedValue one = quantize(1.0, act_fmt);
      for (auto& q : act) q.mantissa = q.mantissa >= thr.mantissa ? one.mantissa : 0;
    } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
      std::vector<QuantizedValue> next;
      next.reserve(out_shape.rows * out_shape.cols);
      for (int t = 0; t < out_shape.rows; ++t) {
        for (int j = 0; j < out_shape.cols; ++j) {
          std::vector<QuantizedValue> terms;
          terms.reserve(conv->kernel_frames * in_shape.cols);
          for (int tap = 0; tap < conv->kernel_frames; ++tap)
            for (int k = 0; k < in_shape.cols; ++k)
              terms.push_back(widened_mul(quantize(conv->weights[tap][k][j], w_fmt),
                                          act[(t + tap) * in_shape.cols + k]));
          next.push_back(neuron(terms, conv->bias[j]));
        }
      }
      act = std::move(next);
    }
  }
  return act;
}

int argmax_lowest(std::span<const Mantissa> values) {
  assert(!values.empty());
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

int predict(const ModelSpec& model, const VideoFeatureSequence& input) {
  auto logits = quantized_forward(model, input);
  std::vector<Mantissa> ms;
  ms.reserve(logits.size());
  for (const auto& q : logits) ms.push_back(q.mantissa);
  return argmax_lowest(ms);
}

}  // namespace satx
