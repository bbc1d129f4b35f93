// SPDX-License-Identifier: Apache-2.0

#include "satx/explain.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "satx/errors.hpp"
#include "satx/external_solver.hpp"
#include "satx/strings.hpp"

namespace satx {

using nlohmann::json;

SolveResult InternalBackend::solve(const CnfFormula& formula,
                                   std::span<const Lit> assumptions) {
  solver_.ensure_vars(formula.num_vars);
  for (; clauses_synced_ < formula.clauses.size(); ++clauses_synced_)
    solver_.add_clause(formula.clauses[clauses_synced_]);
  return solver_.solve(assumptions);
}

SolveResult ExternalBackend::solve(const CnfFormula& formula,
                                   std::span<const Lit> assumptions) {
  return solve_external(formula, command_, assumptions);
}

std::unique_ptr<SolveBackend> make_backend(const std::string& spec,
                                           SolverConfig config) {
  if (spec == "internal") return std::make_unique<InternalBackend>(config);
  if (spec.rfind("external:", 0) == 0) {
    std::string command = spec.substr(9);
    if (command.empty()) throw InvalidQueryError("empty external solver command");
    return std::make_unique<ExternalBackend>(command);
  }
  throw InvalidQueryError("unknown backend '" + spec +
                          "' (expected internal or external:<command>)");
}

std::vector<std::pair<int, int>> AbductiveExplanation::kept_features() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& v : verdicts)
    if (v.kept) out.emplace_back(v.frame, v.feature);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Lit> Explainer::assumptions_for(const VideoFeatureSequence& input,
                                            const std::vector<bool>& feature_fixed) const {
  auto all = input_assumptions(em_, input);
  const int bits = em_.activation_format.total_bits;
  std::vector<Lit> out;
  out.reserve(all.size());
  for (int t = 0; t < em_.frames; ++t)
    for (int d = 0; d < em_.features; ++d)
      if (feature_fixed[t * em_.features + d])
        for (int b = 0; b < bits; ++b)
          out.push_back(all[(t * em_.features + d) * bits + b]);
  return out;
}

AbductiveExplanation Explainer::why(const VideoFeatureSequence& input, WhyMode mode,
                                    std::optional<uint64_t> order_seed) {
  const int c = predict(model_, input);
  const int n_features = em_.frames * em_.features;
  Lit guard = mode == WhyMode::Entailment ? constrain_output_not(em_, c)
                                          : constrain_output_is(em_, c);

  std::vector<int> order(n_features);
  for (int i = 0; i < n_features; ++i) order[i] = i;
  if (order_seed) {
    // Hand-rolled Fisher-Yates: std::shuffle is not specified portably.
    std::mt19937_64 rng(*order_seed);
    for (int i = n_features - 1; i > 0; --i) {
      int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
  }

  AbductiveExplanation out;
  out.mode = mode;
  out.predicted_class = c;
  std::vector<bool> fixed(n_features, true);
  for (int f : order) {
    fixed[f] = false;  // tentatively free this feature
    auto assumptions = assumptions_for(input, fixed);
    assumptions.push_back(guard);
    SolveResult r = backend_.solve(em_.formula, assumptions);
    if (r.status == SolveStatus::BudgetExhausted)
      throw Error("solver budget exhausted during why-query");
    bool freed = mode == WhyMode::Entailment ? r.unsat() : r.sat();
    if (!freed) fixed[f] = true;
    out.verdicts.push_back(FeatureVerdict{f / em_.features, f % em_.features,
                                          !freed, r.sat()});
  }

  // Certificate for the final set: fixing it and asserting output != c must
  // be unsatisfiable (meaningful in entailment mode, recorded in both).
  Lit not_c = constrain_output_not(em_, c);
  auto final_assumptions = assumptions_for(input, fixed);
  final_assumptions.push_back(not_c);
  out.final_check_unsat = backend_.solve(em_.formula, final_assumptions).unsat();
  return out;
}

bool Explainer::check_axp(const VideoFeatureSequence& input,
                          std::span<const std::pair<int, int>> fixed_features,
                          int cls) {
  std::vector<bool> fixed(em_.frames * em_.features, false);
  for (auto [t, d] : fixed_features) {
    if (t < 0 || t >= em_.frames || d < 0 || d >= em_.features)
      throw std::invalid_argument("feature index out of range");
    fixed[t * em_.features + d] = true;
  }
  Lit guard = constrain_output_not(em_, cls);
  auto assumptions = assumptions_for(input, fixed);
  assumptions.push_back(guard);
  return backend_.solve(em_.formula, assumptions).unsat();
}

ContrastiveExplanation Explainer::whynot(const VideoFeatureSequence& input,
                                         int target_class, Granularity granularity) {
  const int c1 = predict(model_, input);
  if (target_class < 0 || target_class >= em_.num_classes)
    throw InvalidQueryError("target class " + std::to_string(target_class) +
                            " out of range");
  if (target_class == c1)
    throw InvalidQueryError("target class equals the current prediction (" +
                            std::to_string(c1) + ")");

  ContrastiveExplanation out;
  out.granularity = granularity;
  out.original_class = c1;
  out.target_class = target_class;

  Lit target_guard = constrain_output_is(em_, target_class);
  const FlipSet& flips = flip_variables(em_, input, granularity);

  std::vector<Lit> assumptions{target_guard};
  SolveResult r = backend_.solve(em_.formula, assumptions);
  if (r.status == SolveStatus::BudgetExhausted)
    throw Error("solver budget exhausted during whynot-query");
  if (r.unsat()) {
    // No input at all reaches the target class.
    out.status = ContrastiveExplanation::Status::UnreachableClass;
    out.bound_trace.emplace_back(static_cast<int>(flips.indicator_vars.size()), 'U');
    return out;
  }

  auto count_cost = [&](const Assignment& model) {
    int cost = 0;
    for (int32_t v : flips.indicator_vars)
      if (model.value(v)) ++cost;
    return cost;
  };

  Assignment best_model = r.model;
  int best_cost = count_cost(r.model);
  out.bound_trace.emplace_back(static_cast<int>(flips.indicator_vars.size()), 'S');
  while (best_cost > 0) {
    Lit bound_guard = cardinality_at_most(em_, flips, best_cost - 1);
    std::vector<Lit> bounded{target_guard, bound_guard};
    SolveResult step = backend_.solve(em_.formula, bounded);
    if (step.status == SolveStatus::BudgetExhausted)
      throw Error("solver budget exhausted during whynot-query");
    if (step.unsat()) {
      out.bound_trace.emplace_back(best_cost - 1, 'U');
      out.certified_unsat_bound = best_cost - 1;
      break;
    }
    out.bound_trace.emplace_back(best_cost - 1, 'S');
    int cost = count_cost(step.model);
    if (cost >= best_cost)
      throw Error("cardinality bound failed to reduce the flip count");
    best_model = step.model;
    best_cost = cost;
  }
  if (best_cost == 0) out.certified_unsat_bound = -1;  // cost 0 needs no bound

  out.cost = best_cost;
  out.modified_input = decode_input(em_, best_model);

  // Validity is re-established through the reference quantized pass, never
  // trusted from the SAT model.
  if (predict(model_, out.modified_input) != target_class)
    throw Error("contrastive candidate failed reference re-classification");

  for (std::size_t i = 0; i < flips.indicator_vars.size(); ++i) {
    if (!best_model.value(flips.indicator_vars[i])) continue;
    FlipRecord rec;
    rec.label = flips.labels[i];
    int cell = rec.label.frame * em_.features + rec.label.feature;
    QuantizedValue old_q{em_.activation_format,
                         Mantissa(flips.original_mantissas[cell])};
    rec.old_value = real_to_string(dequantize(old_q));
    rec.new_value = real_to_string(
        out.modified_input.at(rec.label.frame, rec.label.feature));
    out.flips.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

namespace {

std::string granularity_name(Granularity g) {
  return g == Granularity::Bits ? "bits" : "features";
}

Granularity granularity_from_name(const std::string& s) {
  if (s == "bits") return Granularity::Bits;
  if (s == "features") return Granularity::Features;
  throw SchemaError("unknown granularity '" + s + "'");
}

}  // namespace

std::string render_report(const AbductiveExplanation& e) {
  json doc;
  doc["query"] = "why";
  doc["mode"] = e.mode == WhyMode::Entailment ? "entailment" : "paper-literal";
  doc["predicted_class"] = e.predicted_class;
  json verdicts = json::array();
  for (const auto& v : e.verdicts)
    verdicts.push_back({{"frame", v.frame},
                        {"feature", v.feature},
                        {"kept", v.kept},
                        {"solver_sat", v.solver_sat}});
  doc["feature_verdicts"] = verdicts;
  json kept = json::array();
  for (auto [t, d] : e.kept_features()) kept.push_back({{"frame", t}, {"feature", d}});
  doc["explanation_features"] = kept;
  doc["certificate"] = {{"final_check_unsat", e.final_check_unsat}};
  return doc.dump(1) + "\n";
}

std::string render_report(const ContrastiveExplanation& e) {
  json doc;
  doc["query"] = "whynot";
  doc["status"] = e.status == ContrastiveExplanation::Status::Found
                      ? "found"
                      : "unreachable-class";
  doc["granularity"] = granularity_name(e.granularity);
  doc["original_class"] = e.original_class;
  doc["target_class"] = e.target_class;
  doc["cost"] = e.cost;
  json flips = json::array();
  for (const auto& f : e.flips)
    flips.push_back({{"frame", f.label.frame},
                     {"feature", f.label.feature},
                     {"bit", f.label.bit},
                     {"old", f.old_value},
                     {"new", f.new_value}});
  doc["flips"] = flips;
  if (e.status == ContrastiveExplanation::Status::Found) {
    json rows = json::array();
    for (int t = 0; t < e.modified_input.frames; ++t) {
      json row = json::array();
      for (int d = 0; d < e.modified_input.features; ++d)
        row.push_back(real_to_string(e.modified_input.at(t, d)));
      rows.push_back(row);
    }
    doc["modified_input"] = {{"frames", e.modified_input.frames},
                             {"features", e.modified_input.features},
                             {"values", rows}};
  }
  json trace = json::array();
  for (auto [bound, verdict] : e.bound_trace)
    trace.push_back({{"bound", bound}, {"verdict", std::string(1, verdict)}});
  doc["certificate"] = {{"bound_trace", trace},
                        {"certified_unsat_bound", e.certified_unsat_bound}};
  return doc.dump(1) + "\n";
}

AbductiveExplanation parse_why_report(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw SchemaError("report parse error: " + std::string(ex.what()));
  }
  AbductiveExplanation e;
  try {
    if (doc.at("query").get<std::string>() != "why")
      throw SchemaError("not a why-report");
    e.mode = doc.at("mode").get<std::string>() == "entailment"
                 ? WhyMode::Entailment
                 : WhyMode::PaperLiteral;
    e.predicted_class = doc.at("predicted_class").get<int>();
    for (const auto& v : doc.at("feature_verdicts"))
      e.verdicts.push_back(FeatureVerdict{v.at("frame").get<int>(),
                                          v.at("feature").get<int>(),
                                          v.at("kept").get<bool>(),
                                          v.at("solver_sat").get<bool>()});
    e.final_check_unsat = doc.at("certificate").at("final_check_unsat").get<bool>();
  } catch (const json::exception& ex) {
    throw SchemaError("report field error: " + std::string(ex.what()));
  }
  return e;
}

ContrastiveExplanation parse_whynot_report(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw SchemaError("report parse error: " + std::string(ex.what()));
  }
  ContrastiveExplanation e;
  try {
    if (doc.at("query").get<std::string>() != "whynot")
      throw SchemaError("not a whynot-report");
    e.status = doc.at("status").get<std::string>() == "found"
                   ? ContrastiveExplanation::Status::Found
                   : ContrastiveExplanation::Status::UnreachableClass;
    e.granularity = granularity_from_name(doc.at("granularity").get<std::string>());
    e.original_class = doc.at("original_class").get<int>();
    e.target_class = doc.at("target_class").get<int>();
    e.cost = doc.at("cost").get<int>();
    for (const auto& f : doc.at("flips")) {
      FlipRecord rec;
      rec.label = FlipLabel{f.at("frame").get<int>(), f.at("feature").get<int>(),
                            f.at("bit").get<int>()};
      rec.old_value = f.at("old").get<std::string>();
      rec.new_value = f.at("new").get<std::string>();
      e.flips.push_back(rec);
    }
    if (e.status == ContrastiveExplanation::Status::Found) {
      const json& mi = doc.at("modified_input");
      e.modified_input.frames = mi.at("frames").get<int>();
      e.modified_input.features = mi.at("features").get<int>();
      for (const auto& row : mi.at("values"))
        for (const auto& v : row)
          e.modified_input.values.push_back(
              real_from_string(v.get<std::string>()));
    }
    const json& cert = doc.at("certificate");
    for (const auto& step : cert.at("bound_trace"))
      e.bound_trace.emplace_back(step.at("bound").get<int>(),
                                 step.at("verdict").get<std::string>().at(0));
    e.certified_unsat_bound = cert.at("certified_unsat_bound").get<int>();
  } catch (const json::exception& ex) {
    throw SchemaError("report field error: " + std::string(ex.what()));
  }
  return e;
}

}  // namespace satx
