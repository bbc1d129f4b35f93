// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "satx/errors.hpp"
#include "satx/model.hpp"
#include "satx/strings.hpp"
#include "test_util.hpp"

using namespace satx;
using satx::testing::data_file;
using satx::testing::features_of;

namespace {

ModelSpec two_layer_model() {
  ModelSpec m;
  m.input_frames = 2;
  m.input_features = 2;
  m.num_classes = 2;
  m.weight_format = {6, 3};
  m.activation_format = {6, 3};
  m.layers.push_back(FlattenLayer{});
  m.layers.push_back(DenseLayer{{{0.5, -0.25, 0.0, 1.0},
                                 {0.125, 0.0, -1.0, 0.25},
                                 {0.0, 0.5, 0.5, 0.0}},
                                {0.1, -0.2, 0.3}});
  m.layers.push_back(ReluLayer{});
  m.layers.push_back(DenseLayer{{{1.0, 0.0, -0.5}, {0.0, 0.25, 0.75}},
                                {0.0, 0.05}});
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("model save/load round trip") {
  auto dir = satx::testing::scratch_dir("model");
  auto path = (dir / "m.json").string();
  ModelSpec m = two_layer_model();
  save_model(m, path);
  ModelSpec loaded = load_model(path);
  CHECK(loaded.input_frames == m.input_frames);
  CHECK(loaded.input_features == m.input_features);
  CHECK(loaded.num_classes == m.num_classes);
  CHECK(loaded.weight_format == m.weight_format);
  CHECK(loaded.layers.size() == m.layers.size());
  // Decimal-string serialization is exact, so the round trip is bit-exact.
  CHECK(model_to_json(loaded) == model_to_json(m));
  std::filesystem::remove_all(dir);
}

TEST_CASE("model file schema errors name the offending field") {
  ModelSpec m = two_layer_model();
  std::string text = model_to_json(m);
  auto doc = nlohmann::json::parse(text);
  doc["layers"][1]["bias"] = {"0.1", "0.2"};  // wrong length for out=3
  CHECK_THROWS_WITH_AS(model_from_json(doc.dump()),
                       doctest::Contains("bias length mismatch, layer 1"),
                       SchemaError);

  auto doc2 = nlohmann::json::parse(text);
  doc2["layers"][1]["weights"] = {"0.1"};
  CHECK_THROWS_WITH_AS(model_from_json(doc2.dump()),
                       doctest::Contains("layer 1"), SchemaError);

  CHECK_THROWS_AS(model_from_json("{not json"), SchemaError);
}

TEST_CASE("fixture model loads and predicts on its sample") {
  ModelSpec m = load_model(data_file("fixture_model6.json"));
  CHECK(m.num_classes == 4);
  CHECK(m.input_frames == 4);
  CHECK(m.input_features == 2);
  auto input = load_features(data_file("fixture_input6.json"));
  int cls = predict(m, input);
  CHECK(cls >= 0);
  CHECK(cls < 4);
}

TEST_CASE("float_forward basics") {
  ModelSpec zero;
  zero.input_frames = 1;
  zero.input_features = 2;
  zero.num_classes = 2;
  zero.layers.push_back(FlattenLayer{});
  zero.layers.push_back(DenseLayer{{{0.0, 0.0}, {0.0, 0.0}}, {0.0, 0.0}});
  auto logits = float_forward(zero, features_of({0.3, -0.4}, 1, 2));
  CHECK(logits == std::vector<double>{0.0, 0.0});

  // Identity dense + relu passes nonnegative input through.
  ModelSpec ident;
  ident.input_frames = 1;
  ident.input_features = 2;
  ident.num_classes = 2;
  ident.layers.push_back(FlattenLayer{});
  ident.layers.push_back(DenseLayer{{{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0}});
  ident.layers.push_back(ReluLayer{});
  auto passed = float_forward(ident, features_of({0.25, 0.75}, 1, 2));
  CHECK(passed == std::vector<double>{0.25, 0.75});

  CHECK_THROWS_AS(float_forward(ident, features_of({0.0}, 1, 1)), SchemaError);
}

TEST_CASE("float and quantized logits match the frozen golden file") {
  ModelSpec m = load_model(data_file("fixture_model.json"));
  auto input = load_features(data_file("fixture_input.json"));
  std::ifstream in(data_file("golden.json"));
  REQUIRE(in.good());
  nlohmann::json golden;
  in >> golden;

  auto float_logits = float_forward(m, input);
  auto expected_float = golden.at("float_logits");
  REQUIRE(float_logits.size() == expected_float.size());
  for (std::size_t i = 0; i < float_logits.size(); ++i)
    CHECK(float_logits[i] ==
          real_from_string(expected_float[i].get<std::string>()));

  auto quant = quantized_forward(m, input);
  auto expected_quant = golden.at("quantized_logit_mantissas");
  for (std::size_t i = 0; i < quant.size(); ++i)
    CHECK(quant[i].mantissa ==
          mantissa_from_string(expected_quant[i].get<std::string>()));

  CHECK(predict(m, input) == golden.at("predicted_class").get<int>());
}

TEST_CASE("paper worked example: threshold neuron") {
  ModelSpec m = satx::testing::paper_neuron_model();
  auto one_one = quantized_forward(m, features_of({1.0, 1.0}, 1, 2));
  CHECK(one_one[0].mantissa == 1);
  auto one_zero = quantized_forward(m, features_of({1.0, 0.0}, 1, 2));
  CHECK(one_zero[0].mantissa == 0);
  auto zero_zero = quantized_forward(m, features_of({0.0, 0.0}, 1, 2));
  CHECK(zero_zero[0].mantissa == 0);
}

TEST_CASE("quantized_forward zero network stays zero") {
  ModelSpec zero;
  zero.input_frames = 2;
  zero.input_features = 2;
  zero.num_classes = 4;
  zero.activation_format = {4, 2};
  zero.layers.push_back(FlattenLayer{});
  zero.layers.push_back(DenseLayer{
      {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}, {0, 0, 0, 0}});
  zero.layers.push_back(ReluLayer{});
  auto logits = quantized_forward(zero, features_of({0, 0, 0, 0}, 2, 2));
  for (const auto& q : logits) CHECK(q.mantissa == 0);
}

TEST_CASE("quantized_forward is deterministic") {
  ModelSpec m = two_layer_model();
  auto input = features_of({0.3, -0.7, 0.2, 0.9}, 2, 2);
  auto a = quantized_forward(m, input);
  auto b = quantized_forward(m, input);
  CHECK(a == b);
}

TEST_CASE("float vs dequantized quantized forward stays within the derived bound") {
  // The bound is derived per model by interval propagation of worst-case
  // quantization errors; models are drawn so no saturation can occur.
  std::mt19937_64 rng(29);
  FixedPointFormat fmt{10, 5};
  for (int iter = 0; iter < 100; ++iter) {
    int in_w = 2 + static_cast<int>(rng() % 3);
    int hidden = 2 + static_cast<int>(rng() % 3);
    auto draw = [&] { return (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5); };
    ModelSpec m;
    m.input_frames = 1;
    m.input_features = in_w;
    m.num_classes = 2;
    m.weight_format = fmt;
    m.activation_format = fmt;
    m.layers.push_back(FlattenLayer{});
    DenseLayer l1;
    l1.weights.assign(hidden, std::vector<double>(in_w, 0.0));
    l1.bias.assign(hidden, 0.0);
    for (auto& row : l1.weights)
      for (double& w : row) w = draw();
    for (double& b : l1.bias) b = draw() * 0.25;
    m.layers.push_back(l1);
    m.layers.push_back(ReluLayer{});
    DenseLayer l2;
    l2.weights.assign(2, std::vector<double>(hidden, 0.0));
    l2.bias.assign(2, 0.0);
    for (auto& row : l2.weights)
      for (double& w : row) w = draw();
    for (double& b : l2.bias) b = draw() * 0.25;
    m.layers.push_back(l2);
    m.validate();

    VideoFeatureSequence input = VideoFeatureSequence::zeros(1, in_w);
    for (double& v : input.values) v = draw();

    // err(dense_out) <= sum_k (|w| * err_in + eps_w * (|x| + err_in))
    //                  + eps_bias + floor_step, with |x| <= 1 here.
    const double eps = fmt.resolution() / 2.0;
    const double floor_step = fmt.resolution();
    std::vector<double> err(in_w, eps), mag(in_w, 1.0);
    auto through_dense = [&](const DenseLayer& d) {
      std::vector<double> out_err(d.bias.size(), 0.0), out_mag(d.bias.size(), 0.0);
      for (std::size_t j = 0; j < d.bias.size(); ++j) {
        double e = eps + floor_step;  // bias quantization + requantize floor
        double magnitude = std::abs(d.bias[j]);
        for (std::size_t k = 0; k < d.weights[j].size(); ++k) {
          e += std::abs(d.weights[j][k]) * err[k] + eps * (mag[k] + err[k]);
          magnitude += std::abs(d.weights[j][k]) * mag[k];
        }
        out_err[j] = e;
        out_mag[j] = magnitude;
      }
      err = out_err;
      mag = out_mag;
    };
    through_dense(std::get<DenseLayer>(m.layers[1]));
    through_dense(std::get<DenseLayer>(m.layers[3]));

    auto float_logits = float_forward(m, input);
    auto quant = quantized_forward(m, input);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(std::abs(float_logits[c] - dequantize(quant[c])) <= err[c] + 1e-9);
    }
  }
}

TEST_CASE("predict tie-breaks to the lowest class") {
  std::vector<Mantissa> a{3, 1, 2};
  CHECK(argmax_lowest(a) == 0);
  std::vector<Mantissa> tie{5, 5};
  CHECK(argmax_lowest(tie) == 0);
  std::vector<Mantissa> later{1, 4, 4};
  CHECK(argmax_lowest(later) == 1);
}

TEST_CASE("predict is argmax-stable under class permutation") {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 50; ++iter) {
    ModelSpec m = two_layer_model();
    VideoFeatureSequence input = VideoFeatureSequence::zeros(2, 2);
    for (double& v : input.values)
      v = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
    auto& final_dense = std::get<DenseLayer>(m.layers.back());
    auto logits_before = quantized_forward(m, input);
    std::swap(final_dense.weights[0], final_dense.weights[1]);
    std::swap(final_dense.bias[0], final_dense.bias[1]);
    auto logits_after = quantized_forward(m, input);
    CHECK(logits_before[0] == logits_after[1]);
    CHECK(logits_before[1] == logits_after[0]);
  }
}

TEST_CASE("shape bookkeeping") {
  ModelSpec m = satx::testing::conv_model();
  auto shapes = m.shapes();
  CHECK(shapes[0] == GridShape{3, 1});
  CHECK(shapes[1] == GridShape{2, 2});  // conv output
  CHECK(shapes[3] == GridShape{1, 4});  // flatten preserves element count
  CHECK(shapes[1].rows * shapes[1].cols == shapes[3].rows * shapes[3].cols);

  ModelSpec bad = m;
  bad.num_classes = 3;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("num_classes"),
                       SchemaError);

  ModelSpec dense_on_grid;
  dense_on_grid.input_frames = 2;
  dense_on_grid.input_features = 2;
  dense_on_grid.num_classes = 2;
  dense_on_grid.layers.push_back(DenseLayer{{{1.0, 0.0}, {0.0, 1.0}}, {0, 0}});
  CHECK_THROWS_WITH_AS(dense_on_grid.validate(),
                       doctest::Contains("unflattened"), SchemaError);
}

TEST_CASE("temporal conv quantized pass matches a hand computation") {
  ModelSpec m = satx::testing::conv_model();
  // Input column (0.5, 0, -0.5): conv taps (0.5,0.5)/( -0.5,0.5) over pairs.
  auto input = features_of({0.5, 0.0, -0.5}, 3, 1);
  auto q = quantized_forward(m, input);
  // Hand: window (0.5,0)   -> out0 = 0.25 -> relu 0.25, out1 = -0.25 -> 0
  //       window (0,-0.5)  -> out0 = -0.25 -> 0,        out1 = -0.25 -> 0
  // dense: logit0 = 0.5*0.25 = 0.125 -> floor to quantum 0.125?? at 3,1:
  // quantum 0.5, so 0.125 floors to 0. logit1 = 0.
  CHECK(q[0].mantissa == 0);
  CHECK(q[1].mantissa == 0);

  auto bigger = features_of({1.0, 1.0, 1.0}, 3, 1);
  auto qb = quantized_forward(m, bigger);
  // windows (1,1): out0 = relu(1.0)=1.0, out1 = relu(0)... taps: out0 =
  // 0.5*1+0.5*1 = 1.0; out1 = -0.5*1+0.5*1 = 0. dense: logit0 = 0.5*1 +
  // 0.5*1 = 1.0 -> mantissa 2 at (3,1); logit1 = 0.
  CHECK(qb[0].mantissa == 2);
  CHECK(qb[1].mantissa == 0);
}
