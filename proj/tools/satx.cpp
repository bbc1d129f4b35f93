// SPDX-License-Identifier: Apache-2.0
//
// satx: compiles small quantized video classifiers to CNF and answers
// "why" / "why not" queries about their predictions with SAT certificates.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "satx/encoder.hpp"
#include "satx/errors.hpp"
#include "satx/explain.hpp"
#include "satx/external_solver.hpp"
#include "satx/model.hpp"
#include "satx/oracle.hpp"
#include "satx/solver.hpp"
#include "satx/strings.hpp"
#include "satx/train.hpp"
#include "satx/video.hpp"

namespace {

using nlohmann::json;
using namespace satx;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out.flush()) throw Error("write failed: " + path);
}

json stats_json(const SolverStats& s) {
  return json{{"solves", s.solves},       {"decisions", s.decisions},
              {"propagations", s.propagations}, {"conflicts", s.conflicts},
              {"restarts", s.restarts},   {"learned", s.learned},
              {"deleted", s.deleted}};
}

// Reports carry the parsed explanation plus an invocation echo and solver
// statistics; parsers ignore the extra fields.
void write_report(const std::string& path, const std::string& rendered,
                  const json& echo, const SolveBackend& backend) {
  json doc = json::parse(rendered);
  doc["invocation"] = echo;
  doc["solver"] = stats_json(backend.stats());
  doc["backend"] = backend.name();
  write_text(path, doc.dump(1) + "\n");
}

struct CommonQueryArgs {
  std::string model_path;
  std::string input_path;
  std::string out_path;
  std::string backend_spec = "internal";
  uint64_t seed = 0;
};

int run_gen_data(uint64_t seed, int count, int frames, int height, int width,
                 const std::string& out, const std::string& features_dir) {
  Dataset dataset = gen_videos(seed, count, frames, height, width);
  save_dataset(dataset, out);
  if (!features_dir.empty()) {
    for (std::size_t i = 0; i < dataset.videos.size(); ++i) {
      auto features = extract_features(dataset.videos[i]);
      save_features(features,
                    features_dir + "/input_" + std::to_string(i) + ".json");
    }
  }
  std::cout << "wrote " << dataset.videos.size() << " videos to " << out << "\n";
  return 0;
}

int run_train(const std::string& data_path, const std::string& hidden,
              int epochs, double lr, uint64_t seed, const std::string& wf,
              const std::string& af, const std::string& out) {
  Dataset dataset = load_dataset(data_path);
  TrainOptions options;
  options.hidden_widths.clear();
  std::stringstream hs(hidden);
  std::string part;
  while (std::getline(hs, part, ','))
    if (!part.empty()) options.hidden_widths.push_back(std::stoi(part));
  options.epochs = epochs;
  options.learning_rate = lr;
  options.seed = seed;
  options.weight_format = parse_format(wf);
  options.activation_format = parse_format(af);
  TrainResult result = train_model(dataset, options);
  save_model(result.model, out);
  std::cout << "train accuracy " << result.train_accuracy << ", final loss "
            << result.final_loss << ", model written to " << out << "\n";
  return 0;
}

int run_quantize(const std::string& model_path, const std::string& wf,
                 const std::string& af, const std::string& data_path,
                 const std::string& out) {
  ModelSpec model = load_model(model_path);
  if (!wf.empty()) model.weight_format = parse_format(wf);
  if (!af.empty()) model.activation_format = parse_format(af);
  save_model(model, out);
  std::cout << "quantization set to weights " << model.weight_format.total_bits
            << ":" << model.weight_format.frac_bits << ", activations "
            << model.activation_format.total_bits << ":"
            << model.activation_format.frac_bits << "\n";
  if (!data_path.empty()) {
    Dataset dataset = load_dataset(data_path);
    auto train = labelled_features(dataset, dataset.train_indices);
    std::cout << "float accuracy " << float_accuracy(model, train)
              << ", quantized accuracy " << quantized_accuracy(model, train)
              << " on the train split\n";
  }
  return 0;
}

int run_encode(const std::string& model_path, const std::string& out,
               std::string varmap_path, const std::string& input_path,
               std::optional<int> output_is, std::optional<int> output_not) {
  ModelSpec model = load_model(model_path);
  EncodedModel em = encode_model(model);
  if (!input_path.empty()) {
    auto input = load_features(input_path);
    for (Lit a : input_assumptions(em, input)) em.formula.add_clause({a});
  }
  if (output_is) em.formula.add_clause({constrain_output_is(em, *output_is)});
  if (output_not) em.formula.add_clause({constrain_output_not(em, *output_not)});
  write_dimacs_file(em.formula, out);
  if (varmap_path.empty()) varmap_path = out + ".vars.json";
  save_varmap(em.varmap, varmap_path);
  std::cout << "encoded " << em.formula.num_vars << " vars, "
            << em.formula.clauses.size() << " clauses to " << out
            << " (varmap " << varmap_path << ")\n";
  return 0;
}

int run_explain_why(const CommonQueryArgs& args, const std::string& mode_name,
                    std::optional<uint64_t> order_seed) {
  ModelSpec model = load_model(args.model_path);
  auto input = load_features(args.input_path);
  EncodedModel em = encode_model(model);
  SolverConfig config;
  config.seed = args.seed;
  auto backend = make_backend(args.backend_spec, config);
  Explainer explainer(model, em, *backend);
  WhyMode mode;
  if (mode_name == "entailment")
    mode = WhyMode::Entailment;
  else if (mode_name == "paper-literal")
    mode = WhyMode::PaperLiteral;
  else
    throw InvalidQueryError("unknown mode '" + mode_name + "'");
  AbductiveExplanation explanation = explainer.why(input, mode, order_seed);
  json echo{{"command", "explain why"},
            {"model", args.model_path},
            {"input", args.input_path},
            {"mode", mode_name},
            {"seed", args.seed}};
  if (order_seed) echo["order_seed"] = *order_seed;
  write_report(args.out_path, render_report(explanation), echo, *backend);
  std::cout << "prediction " << explanation.predicted_class << ", "
            << explanation.kept_features().size()
            << " necessary features, report written to " << args.out_path << "\n";
  return 0;
}

int run_explain_whynot(const CommonQueryArgs& args, int target_class,
                       const std::string& granularity_name) {
  ModelSpec model = load_model(args.model_path);
  auto input = load_features(args.input_path);
  EncodedModel em = encode_model(model);
  SolverConfig config;
  config.seed = args.seed;
  auto backend = make_backend(args.backend_spec, config);
  Explainer explainer(model, em, *backend);
  Granularity granularity;
  if (granularity_name == "bits")
    granularity = Granularity::Bits;
  else if (granularity_name == "features")
    granularity = Granularity::Features;
  else
    throw InvalidQueryError("unknown granularity '" + granularity_name + "'");
  ContrastiveExplanation explanation =
      explainer.whynot(input, target_class, granularity);
  json echo{{"command", "explain whynot"},
            {"model", args.model_path},
            {"input", args.input_path},
            {"target_class", target_class},
            {"granularity", granularity_name},
            {"seed", args.seed}};
  write_report(args.out_path, render_report(explanation), echo, *backend);
  if (explanation.status == ContrastiveExplanation::Status::Found)
    std::cout << "class " << explanation.original_class << " -> "
              << explanation.target_class << " at cost " << explanation.cost
              << ", report written to " << args.out_path << "\n";
  else
    std::cout << "class " << target_class
              << " is unreachable for any input; report written to "
              << args.out_path << "\n";
  return 0;
}

int run_fidelity(const std::string& model_path, bool exhaustive, uint64_t samples,
                 uint64_t seed, int jobs, const std::string& out) {
  ModelSpec model = load_model(model_path);
  EncodedModel em = encode_model(model);
  oracle::FidelityReport report =
      exhaustive ? oracle::exhaustive_fidelity(model, em, jobs)
                 : oracle::sampled_fidelity(model, em, samples, seed, jobs);
  json doc;
  doc["mode"] = report.exhaustive ? "exhaustive" : "sampled";
  doc["inputs_checked"] = report.inputs_checked;
  doc["pass"] = report.pass();
  json mismatches = json::array();
  for (const auto& m : report.mismatches) {
    json entry;
    entry["input_index"] = m.input_index;
    entry["solver_unsat"] = m.solver_unsat;
    json expected = json::array();
    for (Mantissa v : m.expected) expected.push_back(mantissa_to_string(v));
    json circuit = json::array();
    for (Mantissa v : m.circuit) circuit.push_back(mantissa_to_string(v));
    entry["expected_logits"] = expected;
    entry["circuit_logits"] = circuit;
    mismatches.push_back(entry);
  }
  doc["mismatches"] = mismatches;
  if (!out.empty()) write_text(out, doc.dump(1) + "\n");
  std::cout << (report.exhaustive ? "exhaustive" : "sampled") << " fidelity: "
            << report.inputs_checked << " inputs, " << report.mismatches.size()
            << " mismatches\n";
  return report.pass() ? 0 : 1;
}

int run_solve(const std::string& cnf_path, const std::string& backend_spec,
              uint64_t seed) {
  CnfFormula formula = read_dimacs_file(cnf_path);
  SolveResult result;
  if (backend_spec == "internal") {
    SolverConfig config;
    config.seed = seed;
    Solver solver(config);
    solver.add_formula(formula);
    result = solver.solve();
  } else {
    SolverConfig config;
    config.seed = seed;
    auto backend = make_backend(backend_spec, config);
    result = backend->solve(formula, {});
  }
  if (result.status == SolveStatus::BudgetExhausted) {
    std::cout << "s UNKNOWN\n";
    return 1;
  }
  if (result.unsat()) {
    std::cout << "s UNSATISFIABLE\n";
    return 0;
  }
  std::cout << "s SATISFIABLE\n";
  std::cout << "v";
  for (int32_t v = 1; v <= formula.num_vars; ++v)
    std::cout << ' ' << (result.model.value(v) ? v : -v);
  std::cout << " 0\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAT-based explanations for quantized video classifiers"};
  app.require_subcommand(1);
  int exit_code = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic video dataset");
  uint64_t gen_seed = 0;
  int gen_count = 40, gen_frames = 3, gen_height = 8, gen_width = 8;
  std::string gen_out, gen_features_dir;
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--count", gen_count, "Number of videos");
  gen->add_option("--frames", gen_frames, "Frames per video");
  gen->add_option("--height", gen_height, "Grid height");
  gen->add_option("--width", gen_width, "Grid width");
  gen->add_option("--out", gen_out, "Dataset file")->required();
  gen->add_option("--features-out", gen_features_dir,
                  "Also write per-video feature files into this directory");
  gen->callback([&] {
    exit_code = run_gen_data(gen_seed, gen_count, gen_frames, gen_height,
                             gen_width, gen_out, gen_features_dir);
  });

  // train
  auto* train = app.add_subcommand("train", "Train a small dense classifier");
  std::string train_data, train_hidden = "8", train_out;
  std::string train_wf = "6:3", train_af = "6:3";
  int train_epochs = 200;
  double train_lr = 0.05;
  uint64_t train_seed = 7;
  train->add_option("--data", train_data, "Dataset file")->required();
  train->add_option("--hidden", train_hidden, "Hidden widths, comma separated");
  train->add_option("--epochs", train_epochs, "Training epochs");
  train->add_option("--lr", train_lr, "Learning rate");
  train->add_option("--seed", train_seed, "Init/shuffle seed");
  train->add_option("--weight-format", train_wf, "Weight format n:f");
  train->add_option("--activation-format", train_af, "Activation format n:f");
  train->add_option("--out", train_out, "Model file")->required();
  train->callback([&] {
    exit_code = run_train(train_data, train_hidden, train_epochs, train_lr,
                          train_seed, train_wf, train_af, train_out);
  });

  // quantize
  auto* quant = app.add_subcommand("quantize", "Set a model's fixed-point formats");
  std::string quant_model, quant_wf, quant_af, quant_data, quant_out;
  quant->add_option("--model", quant_model, "Model file")->required();
  quant->add_option("--weight-format", quant_wf, "Weight format n:f");
  quant->add_option("--activation-format", quant_af, "Activation format n:f");
  quant->add_option("--data", quant_data, "Report accuracy on this dataset");
  quant->add_option("--out", quant_out, "Output model file")->required();
  quant->callback([&] {
    exit_code = run_quantize(quant_model, quant_wf, quant_af, quant_data, quant_out);
  });

  // encode
  auto* encode = app.add_subcommand("encode", "Compile a model to DIMACS CNF");
  std::string enc_model, enc_out, enc_varmap, enc_input;
  std::optional<int> enc_is, enc_not;
  encode->add_option("--model", enc_model, "Model file")->required();
  encode->add_option("--out", enc_out, "DIMACS output file")->required();
  encode->add_option("--varmap", enc_varmap,
                     "Varmap sidecar path (default <out>.vars.json)");
  encode->add_option("--input", enc_input,
                     "Fix this feature file's bits as unit clauses");
  encode->add_option("--output-is", enc_is, "Assert argmax == CLASS");
  encode->add_option("--output-not", enc_not, "Assert argmax != CLASS");
  encode->callback([&] {
    exit_code = run_encode(enc_model, enc_out, enc_varmap, enc_input, enc_is, enc_not);
  });

  // explain why / whynot
  auto* explain = app.add_subcommand("explain", "Run an explanation query");
  explain->require_subcommand(1);
  CommonQueryArgs why_args;
  std::string why_mode = "entailment";
  std::optional<uint64_t> why_order_seed;
  auto* why = explain->add_subcommand("why", "Minimal feature set entailing the prediction");
  why->add_option("--model", why_args.model_path, "Model file")->required();
  why->add_option("--input", why_args.input_path, "Feature file")->required();
  why->add_option("--mode", why_mode, "entailment | paper-literal");
  why->add_option("--order-seed", why_order_seed, "Shuffle the deletion order");
  why->add_option("--backend", why_args.backend_spec,
                  "internal | external:<command>");
  why->add_option("--seed", why_args.seed, "Solver seed");
  why->add_option("--out", why_args.out_path, "Report file")->required();
  why->callback(
      [&] { exit_code = run_explain_why(why_args, why_mode, why_order_seed); });

  CommonQueryArgs whynot_args;
  int whynot_target = 0;
  std::string whynot_granularity = "features";
  auto* whynot =
      explain->add_subcommand("whynot", "Minimal input change reaching another class");
  whynot->add_option("--model", whynot_args.model_path, "Model file")->required();
  whynot->add_option("--input", whynot_args.input_path, "Feature file")->required();
  whynot->add_option("--target-class", whynot_target, "Alternative class")->required();
  whynot->add_option("--granularity", whynot_granularity, "bits | features");
  whynot->add_option("--backend", whynot_args.backend_spec,
                     "internal | external:<command>");
  whynot->add_option("--seed", whynot_args.seed, "Solver seed");
  whynot->add_option("--out", whynot_args.out_path, "Report file")->required();
  whynot->callback([&] {
    exit_code = run_explain_whynot(whynot_args, whynot_target, whynot_granularity);
  });

  // fidelity
  auto* fidelity = app.add_subcommand("fidelity",
                                      "Check the encoding against the quantized pass");
  std::string fid_model, fid_out;
  bool fid_exhaustive = false;
  uint64_t fid_samples = 1000, fid_seed = 0;
  int fid_jobs = 1;
  fidelity->add_option("--model", fid_model, "Model file")->required();
  fidelity->add_flag("--exhaustive", fid_exhaustive, "Enumerate all input bit patterns");
  fidelity->add_option("--samples", fid_samples, "Sampled mode: number of inputs");
  fidelity->add_option("--seed", fid_seed, "Sampled mode: RNG seed");
  fidelity->add_option("--jobs", fid_jobs, "Parallel enumeration threads");
  fidelity->add_option("--out", fid_out, "Report file");
  fidelity->callback([&] {
    exit_code = run_fidelity(fid_model, fid_exhaustive, fid_samples, fid_seed,
                             fid_jobs, fid_out);
  });

  // solve
  auto* solve = app.add_subcommand("solve", "Solve a DIMACS CNF file");
  std::string solve_path, solve_backend = "internal";
  uint64_t solve_seed = 0;
  solve->add_option("cnf", solve_path, "DIMACS file")->required();
  solve->add_option("--backend", solve_backend, "internal | external:<command>");
  solve->add_option("--seed", solve_seed, "Solver seed");
  solve->callback(
      [&] { exit_code = run_solve(solve_path, solve_backend, solve_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const InvalidQueryError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
