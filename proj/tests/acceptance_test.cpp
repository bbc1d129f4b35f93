// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every criterion prints one PASS/FAIL line with its
// measured runtime, and the binary fails if any criterion fails.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "satx/encoder.hpp"
#include "satx/explain.hpp"
#include "satx/model.hpp"
#include "satx/oracle.hpp"
#include "satx/solver.hpp"
#include "satx/train.hpp"
#include "satx/video.hpp"
#include "test_util.hpp"

using namespace satx;
using satx::testing::and_model;
using satx::testing::data_file;
using satx::testing::features_of;
using satx::testing::quad_model;

namespace {

namespace fs = std::filesystem;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void report(int criterion, const std::string& name, bool pass, double seconds,
            const std::string& detail) {
  std::printf("[criterion %d] %s: %s (%.1fs) %s\n", criterion,
              pass ? "PASS" : "FAIL", name.c_str(), seconds, detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, " failed: ", detail);
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  std::string command = std::string(SATX_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string captured;
  char buf[4096];
  std::size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) captured.append(buf, n);
  int status = ::pclose(pipe);
  if (output) *output = captured;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// The fixture query suite shared by criteria 4, 5, 6 and 8: hand models
// small enough for the brute-force oracles, plus the trained golden fixture.
struct Query {
  std::string tag;
  ModelSpec model;
  VideoFeatureSequence input;
  bool oracle_small;  // within the 12-bit CXp / 8-bit sweep guards
};

std::vector<Query> fixture_queries() {
  std::vector<Query> qs;
  qs.push_back({"and(1,1)", and_model(), features_of({1.0, 1.0}, 1, 2), true});
  qs.push_back({"and(0,1)", and_model(), features_of({0.0, 1.0}, 1, 2), true});
  qs.push_back({"quad8-a", quad_model(2), features_of({1.0, 1.0, 0.0, 0.0}, 2, 2), true});
  qs.push_back({"quad8-b", quad_model(2), features_of({0.0, -1.0, 1.0, 1.0}, 2, 2), true});
  qs.push_back({"quad12", quad_model(3), features_of({1.0, 2.0, -1.0, 0.0}, 2, 2), true});
  ModelSpec fixture = load_model(data_file("fixture_model.json"));
  auto input = load_features(data_file("fixture_input.json"));
  qs.push_back({"golden-fixture", fixture, input, false});
  return qs;
}

}  // namespace

TEST_CASE("criterion 1: paper example reproduction") {
  Timer timer;
  ModelSpec m = satx::testing::paper_neuron_model();
  EncodedModel em = encode_model(m);

  CnfFormula reference;
  reference.num_vars = 3;
  reference.add_clause({-1, -2, 3});
  reference.add_clause({1, -3});
  reference.add_clause({2, -3});

  bool equivalent = true;
  const int bits = m.activation_format.total_bits;
  for (unsigned row = 0; row < 8; ++row) {
    bool x1 = row & 1, x2 = (row >> 1) & 1, y = (row >> 2) & 1;
    std::vector<Lit> assumptions;
    for (int d = 0; d < 2; ++d)
      for (int b = 0; b < bits; ++b) {
        int32_t v = em.input_vars[0][d][b];
        bool value = (d == 0 ? x1 : x2) && b == 0;
        assumptions.push_back(value ? v : -v);
      }
    const BitVecSignal& logit = em.logit_signals[0];
    for (int b = 0; b < logit.width(); ++b) {
      Lit l = logit.bits[b].to_dimacs();
      assumptions.push_back(y && b == 0 ? l : -l);
    }
    bool ours = oracle::dpll_reference(em.formula, assumptions).sat();
    Assignment row_assignment(3);
    row_assignment.set(1, x1);
    row_assignment.set(2, x2);
    row_assignment.set(3, y);
    equivalent = equivalent && (ours == evaluate(reference, row_assignment));
  }
  double secs = timer.seconds();
  report(1, "paper threshold neuron truth-table equivalence",
         equivalent && secs < 1.0, secs,
         equivalent ? "all 8 rows agree" : "truth tables differ");
}

TEST_CASE("criterion 2: encoding fidelity") {
  Timer timer;
  ModelSpec tiny = load_model(data_file("fixture_model.json"));
  EncodedModel tiny_encoded = encode_model(tiny);
  REQUIRE(tiny_encoded.input_bit_count() == 16);
  auto exhaustive = oracle::exhaustive_fidelity(tiny, tiny_encoded, 4);

  ModelSpec larger = load_model(data_file("fixture_model6.json"));
  EncodedModel larger_encoded = encode_model(larger);
  auto sampled = oracle::sampled_fidelity(larger, larger_encoded, 1000, 0, 4);

  double secs = timer.seconds();
  bool pass = exhaustive.exhaustive && exhaustive.inputs_checked == 65536 &&
              exhaustive.pass() && sampled.inputs_checked == 1000 &&
              sampled.pass() && secs < 600.0;
  std::ostringstream detail;
  detail << "exhaustive 2^16: " << exhaustive.mismatches.size()
         << " mismatches; sampled n=1000 on 48-bit variant: "
         << sampled.mismatches.size() << " mismatches";
  report(2, "exhaustive + sampled encoding fidelity", pass, secs, detail.str());
}

TEST_CASE("criterion 3: solver correctness on random 3-SAT") {
  Timer timer;
  std::mt19937_64 rng(20240817);
  int disagreements = 0;
  int unsound = 0;
  int sat_count = 0;
  for (int inst = 0; inst < 500; ++inst) {
    CnfFormula f;
    f.num_vars = 30;
    while (f.clauses.size() < 126) {
      std::vector<Lit> clause;
      while (clause.size() < 3) {
        int v = 1 + static_cast<int>(rng() % 30);
        Lit l = (rng() & 1) ? v : -v;
        bool dup = false;
        for (Lit seen : clause) dup = dup || lit_var(seen) == v;
        if (!dup) clause.push_back(l);
      }
      f.add_clause(clause);
    }
    Solver solver;
    solver.add_formula(f);
    SolveResult got = solver.solve();
    SolveResult ref = oracle::dpll_reference(f);
    if (got.status != ref.status) ++disagreements;
    if (got.sat()) {
      ++sat_count;
      if (!evaluate(f, got.model)) ++unsound;
    }
  }
  double secs = timer.seconds();
  bool pass = disagreements == 0 && unsound == 0 && secs < 120.0;
  std::ostringstream detail;
  detail << "500 instances (n=30, m=126), " << sat_count << " sat, "
         << disagreements << " disagreements, " << unsound << " unsound models";
  report(3, "CDCL agrees with the DPLL reference", pass, secs, detail.str());
}

TEST_CASE("criterion 4: abductive explanation contract") {
  Timer timer;
  bool pass = true;
  std::ostringstream detail;
  for (const Query& q : fixture_queries()) {
    EncodedModel em = encode_model(q.model);
    InternalBackend backend;
    Explainer explainer(q.model, em, backend);
    int cls = predict(q.model, q.input);
    AbductiveExplanation e = explainer.why(q.input);
    auto kept = e.kept_features();
    bool sound = explainer.check_axp(q.input, kept, cls);
    bool minimal = true;
    for (std::size_t drop = 0; drop < kept.size(); ++drop) {
      auto smaller = kept;
      smaller.erase(smaller.begin() + drop);
      minimal = minimal && !explainer.check_axp(q.input, smaller, cls);
    }
    pass = pass && sound && minimal;
    if (!sound || !minimal) detail << q.tag << " violated the contract; ";
  }

  // Exhaustive sweep on the 8-free-bit model: SAT check vs brute force on
  // every feature subset.
  ModelSpec tiny = quad_model(2);
  EncodedModel em = encode_model(tiny);
  InternalBackend backend;
  Explainer explainer(tiny, em, backend);
  int sweeps = 0;
  for (const auto& input :
       {features_of({1.0, 1.0, 0.0, 0.0}, 2, 2),
        features_of({0.0, -1.0, 1.0, 1.0}, 2, 2),
        features_of({-2.0, 1.0, -1.0, 0.0}, 2, 2)}) {
    int cls = predict(tiny, input);
    for (unsigned subset = 0; subset < 16; ++subset) {
      std::vector<std::pair<int, int>> fixed;
      for (int f = 0; f < 4; ++f)
        if ((subset >> f) & 1) fixed.emplace_back(f / 2, f % 2);
      bool sat_route = explainer.check_axp(input, fixed, cls);
      bool brute = oracle::brute_force_axp_check(tiny, input, fixed, cls);
      if (sat_route != brute) pass = false;
      ++sweeps;
    }
  }
  double secs = timer.seconds();
  bool in_time = secs < 300.0;
  std::ostringstream summary;
  summary << fixture_queries().size() << " queries certified sound+minimal; "
          << sweeps << " subset sweeps agree with brute force. " << detail.str();
  report(4, "AXp soundness, minimality, oracle agreement", pass && in_time, secs,
         summary.str());
}

TEST_CASE("criterion 5: contrastive explanation optimality") {
  Timer timer;
  bool pass = true;
  int compared = 0;
  std::ostringstream detail;
  for (const Query& q : fixture_queries()) {
    if (!q.oracle_small) continue;  // brute-force guard: <= 12 input bits
    EncodedModel em = encode_model(q.model);
    InternalBackend backend;
    Explainer explainer(q.model, em, backend);
    int cls = predict(q.model, q.input);
    for (int target = 0; target < q.model.num_classes; ++target) {
      if (target == cls) continue;
      for (Granularity g : {Granularity::Bits, Granularity::Features}) {
        ContrastiveExplanation e = explainer.whynot(q.input, target, g);
        auto brute = oracle::brute_force_min_cxp(q.model, q.input, target, g);
        ++compared;
        if (e.status == ContrastiveExplanation::Status::Found) {
          bool valid = predict(q.model, e.modified_input) == target;
          bool optimal = brute.has_value() && *brute == e.cost;
          pass = pass && valid && optimal;
          if (!valid || !optimal)
            detail << q.tag << "->" << target << " wrong; ";
        } else {
          pass = pass && !brute.has_value();
          if (brute.has_value()) detail << q.tag << "->" << target << " missed; ";
        }
      }
    }
  }
  double secs = timer.seconds();
  std::ostringstream summary;
  summary << compared << " (query,target,granularity) cases match brute force. "
          << detail.str();
  report(5, "CXp cost equals brute-force minimum and reclassifies",
         pass && secs < 300.0, secs, summary.str());
}

TEST_CASE("criterion 6: paper-literal mode vacuity, entailment non-vacuity") {
  Timer timer;
  bool pass = true;
  for (const Query& q : fixture_queries()) {
    EncodedModel em = encode_model(q.model);
    InternalBackend backend;
    Explainer explainer(q.model, em, backend);
    AbductiveExplanation literal = explainer.why(q.input, WhyMode::PaperLiteral);
    AbductiveExplanation entail = explainer.why(q.input, WhyMode::Entailment);
    pass = pass && literal.kept_features().empty();
    pass = pass && !entail.kept_features().empty() && entail.final_check_unsat;
  }
  double secs = timer.seconds();
  report(6, "paper-literal returns empty sets, entailment returns certified sets",
         pass, secs, "both modes on every fixture query");
}

TEST_CASE("criterion 7: end-to-end determinism and runtime") {
  Timer timer;
  auto dir = satx::testing::scratch_dir("acceptance7");
  auto pipeline = [&](const fs::path& sub) {
    fs::create_directories(sub / "features");
    auto p = [&](const std::string& name) { return (sub / name).string(); };
    REQUIRE(run_cli("gen-data --seed 11 --count 40 --frames 3 --out " +
                    p("data.json") + " --features-out " +
                    (sub / "features").string()) == 0);
    REQUIRE(run_cli("train --data " + p("data.json") +
                    " --hidden 8 --epochs 200 --lr 0.05 --seed 7 "
                    "--weight-format 6:3 --activation-format 6:3 --out " +
                    p("float.json")) == 0);
    REQUIRE(run_cli("quantize --model " + p("float.json") +
                    " --activation-format 4:2 --out " + p("model.json")) == 0);
    REQUIRE(run_cli("encode --model " + p("model.json") + " --out " +
                    p("model.cnf")) == 0);
    std::string input = (sub / "features" / "input_0.json").string();
    REQUIRE(run_cli("explain why --model " + p("model.json") + " --input " +
                    input + " --out " + p("why.json")) == 0);
    int predicted = nlohmann::json::parse(slurp(sub / "why.json"))
                        .at("predicted_class")
                        .get<int>();
    REQUIRE(run_cli("explain whynot --model " + p("model.json") + " --input " +
                    input + " --target-class " +
                    std::to_string((predicted + 1) % 4) + " --out " +
                    p("whynot.json")) == 0);
  };
  pipeline(dir / "run1");
  pipeline(dir / "run2");
  bool identical = true;
  for (const char* name : {"data.json", "float.json", "model.json", "model.cnf",
                           "model.cnf.vars.json", "why.json", "whynot.json"}) {
    identical = identical && slurp(dir / "run1" / name) == slurp(dir / "run2" / name);
  }
  fs::remove_all(dir);
  double secs = timer.seconds();
  report(7, "gen-data/train/quantize/encode/why/whynot reproducible",
         identical && secs < 300.0, secs,
         identical ? "two runs byte-identical" : "runs differ");
}

TEST_CASE("criterion 8: internal and external backends agree") {
  Timer timer;
  std::string external_spec = std::string("external:") + SATX_CLI_PATH + " solve";
  bool pass = true;
  int cases = 0;
  std::ostringstream detail;
  for (const Query& q : fixture_queries()) {
    EncodedModel em_int = encode_model(q.model);
    InternalBackend internal;
    Explainer ei(q.model, em_int, internal);

    EncodedModel em_ext = encode_model(q.model);
    auto external = make_backend(external_spec);
    Explainer ee(q.model, em_ext, *external);

    AbductiveExplanation wi = ei.why(q.input);
    AbductiveExplanation we = ee.why(q.input);
    if (wi.kept_features() != we.kept_features()) {
      pass = false;
      detail << q.tag << " axp differs; ";
    }
    ++cases;

    // Contrastive costs on the small models (the golden fixture's whynot via
    // the external process would rewrite a megabyte-scale CNF per bound).
    if (!q.oracle_small) continue;
    int cls = predict(q.model, q.input);
    for (int target = 0; target < q.model.num_classes; ++target) {
      if (target == cls) continue;
      ContrastiveExplanation ci = ei.whynot(q.input, target, Granularity::Features);
      ContrastiveExplanation ce = ee.whynot(q.input, target, Granularity::Features);
      bool same = ci.status == ce.status &&
                  (ci.status != ContrastiveExplanation::Status::Found ||
                   ci.cost == ce.cost);
      if (!same) {
        pass = false;
        detail << q.tag << "->" << target << " differs; ";
      }
      ++cases;
    }
  }
  double secs = timer.seconds();
  std::ostringstream summary;
  summary << cases << " queries agree across backends. " << detail.str();
  report(8, "backend equivalence through the DIMACS interface", pass, secs,
         summary.str());
}
