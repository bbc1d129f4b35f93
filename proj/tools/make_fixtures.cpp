// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the deterministic test fixtures under tests/data. Run from
// the repository root:  ./build/tools/satx_make_fixtures tests/data

#include <fstream>
#include <iostream>

#include <json.hpp>

#include "satx/model.hpp"
#include "satx/strings.hpp"
#include "satx/train.hpp"
#include "satx/video.hpp"

using namespace satx;
using nlohmann::json;

int main(int argc, char** argv) {
  std::string out_dir = argc > 1 ? argv[1] : "tests/data";

  // Tiny fixture: 3-frame videos -> 2x2 feature grid; 4-bit activations give
  // 16 input bits, small enough for exhaustive encoding checks.
  Dataset small = gen_videos(11, 40, 3, 8, 8);
  save_dataset(small, out_dir + "/dataset_small.json");
  TrainOptions small_opts;
  small_opts.hidden_widths = {8};
  small_opts.epochs = 200;
  small_opts.learning_rate = 0.05;
  small_opts.seed = 7;
  small_opts.weight_format = FixedPointFormat{6, 3};
  small_opts.activation_format = FixedPointFormat{4, 2};
  TrainResult small_result = train_model(small, small_opts);
  save_model(small_result.model, out_dir + "/fixture_model.json");
  auto small_input = extract_features(small.videos[0]);
  save_features(small_input, out_dir + "/fixture_input.json");

  auto train_samples = labelled_features(small, small.train_indices);
  double small_float_acc = float_accuracy(small_result.model, train_samples);
  double small_quant_acc = quantized_accuracy(small_result.model, train_samples);

  // Larger 6-bit variant: 5-frame videos -> 4x2 grid, 48 input bits,
  // exercised through sampled fidelity.
  Dataset large = gen_videos(13, 40, 5, 8, 8);
  save_dataset(large, out_dir + "/dataset_large.json");
  TrainOptions large_opts = small_opts;
  large_opts.activation_format = FixedPointFormat{6, 3};
  TrainResult large_result = train_model(large, large_opts);
  save_model(large_result.model, out_dir + "/fixture_model6.json");
  auto large_input = extract_features(large.videos[1]);
  save_features(large_input, out_dir + "/fixture_input6.json");

  auto large_samples = labelled_features(large, large.train_indices);
  double large_float_acc = float_accuracy(large_result.model, large_samples);
  double large_quant_acc = quantized_accuracy(large_result.model, large_samples);

  // Golden outputs for the tiny fixture (frozen once, compared forever).
  json golden;
  {
    auto float_logits = float_forward(small_result.model, small_input);
    auto quant_logits = quantized_forward(small_result.model, small_input);
    json fl = json::array();
    for (double v : float_logits) fl.push_back(real_to_string(v));
    json ql = json::array();
    for (const auto& q : quant_logits) ql.push_back(mantissa_to_string(q.mantissa));
    golden["float_logits"] = fl;
    golden["quantized_logit_mantissas"] = ql;
    golden["predicted_class"] = predict(small_result.model, small_input);
    golden["train_accuracy"] = real_to_string(small_result.train_accuracy);
    golden["quantized_train_accuracy"] = real_to_string(small_quant_acc);
  }
  std::ofstream g(out_dir + "/golden.json");
  g << golden.dump(1) << "\n";

  std::cout << "tiny fixture:  float acc " << small_float_acc << ", quantized acc "
            << small_quant_acc << "\n";
  std::cout << "large fixture: float acc " << large_float_acc << ", quantized acc "
            << large_quant_acc << "\n";
  return 0;
}
