// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "satx/encoder.hpp"
#include "satx/errors.hpp"
#include "satx/model.hpp"
#include "satx/oracle.hpp"
#include "satx/solver.hpp"
#include "test_util.hpp"

using namespace satx;
using satx::testing::data_file;
using satx::testing::features_of;

namespace {

// Random in-range feature grid for a model.
VideoFeatureSequence random_input(const ModelSpec& m, std::mt19937_64& rng) {
  VideoFeatureSequence seq =
      VideoFeatureSequence::zeros(m.input_frames, m.input_features);
  auto fmt = m.activation_format;
  unsigned __int128 span =
      static_cast<unsigned __int128>(fmt.max_mantissa() - fmt.min_mantissa()) + 1;
  for (double& v : seq.values) {
    Mantissa mant = fmt.min_mantissa() + static_cast<Mantissa>(rng() % span);
    v = dequantize(QuantizedValue{fmt, mant});
  }
  return seq;
}

}  // namespace

TEST_CASE("paper threshold neuron is logically equivalent to the worked clauses") {
  // Mapping: x1 -> bit0 of feature (0,0), x2 -> bit0 of feature (0,1),
  // y -> bit0 of the single logit; all pad bits pinned to zero, Tseitin
  // auxiliaries existentially quantified by the solve.
  ModelSpec m = satx::testing::paper_neuron_model();
  EncodedModel em = encode_model(m);

  CnfFormula reference;
  reference.num_vars = 3;
  reference.add_clause({-1, -2, 3});
  reference.add_clause({1, -3});
  reference.add_clause({2, -3});

  const int bits = m.activation_format.total_bits;
  for (unsigned row = 0; row < 8; ++row) {
    bool x1 = row & 1, x2 = (row >> 1) & 1, y = (row >> 2) & 1;
    std::vector<Lit> assumptions;
    for (int d = 0; d < 2; ++d) {
      bool value = d == 0 ? x1 : x2;
      for (int b = 0; b < bits; ++b) {
        int32_t v = em.input_vars[0][d][b];
        assumptions.push_back(b == 0 && value ? v : -v);
      }
    }
    const BitVecSignal& logit = em.logit_signals[0];
    for (int b = 0; b < logit.width(); ++b) {
      Lit l = logit.bits[b].to_dimacs();
      assumptions.push_back(b == 0 && y ? l : -l);
    }
    bool ours = oracle::dpll_reference(em.formula, assumptions).sat();

    Assignment ref_row(3);
    ref_row.set(1, x1);
    ref_row.set(2, x2);
    ref_row.set(3, y);
    CHECK(ours == evaluate(reference, ref_row));
  }
}

TEST_CASE("zero-weight model folds to constant outputs") {
  ModelSpec zero;
  zero.input_frames = 1;
  zero.input_features = 2;
  zero.num_classes = 2;
  zero.activation_format = {3, 1};
  zero.layers.push_back(FlattenLayer{});
  zero.layers.push_back(DenseLayer{{{0.0, 0.0}, {0.0, 0.0}}, {0.0, 0.0}});
  EncodedModel em = encode_model(zero);
  // All gadgets fold; only the output-binding unit clauses remain.
  for (const auto& clause : em.formula.clauses) CHECK(clause.size() == 1);
  Solver s;
  s.add_formula(em.formula);
  auto r = s.solve(input_assumptions(em, features_of({0.5, -0.5}, 1, 2)));
  REQUIRE(r.sat());
  auto logits = decode_logits(em, r.model);
  CHECK(logits == std::vector<Mantissa>{0, 0});
}

TEST_CASE("input assumption polarities") {
  ModelSpec m = satx::testing::and_model();
  EncodedModel em = encode_model(m);
  auto zero = input_assumptions(em, features_of({0.0, 0.0}, 1, 2));
  for (Lit l : zero) CHECK(l < 0);

  // quantize(0.5, 4:2) has mantissa 2 = bit pattern 0010 (lsb first: 0,1,0,0).
  ModelSpec m42;
  m42.input_frames = 1;
  m42.input_features = 1;
  m42.num_classes = 1;
  m42.activation_format = {4, 2};
  m42.layers.push_back(FlattenLayer{});
  m42.layers.push_back(DenseLayer{{{1.0}}, {0.0}});
  EncodedModel em42 = encode_model(m42);
  auto assumptions = input_assumptions(em42, features_of({0.5}, 1, 1));
  REQUIRE(assumptions.size() == 4);
  CHECK(assumptions[0] < 0);
  CHECK(assumptions[1] > 0);
  CHECK(assumptions[2] < 0);
  CHECK(assumptions[3] < 0);

  CHECK_THROWS_AS(input_assumptions(em, features_of({0.0}, 1, 1)), SchemaError);
}

TEST_CASE("fidelity on 100 random inputs of the golden fixture") {
  ModelSpec m = load_model(data_file("fixture_model.json"));
  EncodedModel em = encode_model(m);
  Solver s;
  s.add_formula(em.formula);
  std::mt19937_64 rng(404);
  for (int iter = 0; iter < 100; ++iter) {
    VideoFeatureSequence input = random_input(m, rng);
    auto r = s.solve(input_assumptions(em, input));
    REQUIRE(r.sat());
    auto expected = quantized_forward(m, input);
    auto got = decode_logits(em, r.model);
    REQUIRE(got.size() == expected.size());
    for (std::size_t c = 0; c < got.size(); ++c)
      CHECK(got[c] == expected[c].mantissa);
  }
}

TEST_CASE("temporal conv model encodes faithfully (exhaustive 9 bits)") {
  ModelSpec m = satx::testing::conv_model();
  EncodedModel em = encode_model(m);
  auto report = oracle::exhaustive_fidelity(m, em);
  CHECK(report.exhaustive);
  CHECK(report.inputs_checked == 512);
  CHECK(report.pass());
}

TEST_CASE("output constraints agree with predict") {
  ModelSpec m = satx::testing::quad_model();
  EncodedModel em = encode_model(m);
  for (int c = 0; c < m.num_classes; ++c) constrain_output_is(em, c);
  Solver s;
  s.add_formula(em.formula);
  std::mt19937_64 rng(900);
  for (int iter = 0; iter < 20; ++iter) {
    VideoFeatureSequence input = random_input(m, rng);
    int cls = predict(m, input);
    auto base = input_assumptions(em, input);
    for (int c = 0; c < m.num_classes; ++c) {
      auto assumptions = base;
      assumptions.push_back(constrain_output_is(em, c));  // cached guard
      SolveResult r = s.solve(assumptions);
      CHECK(r.sat() == (c == cls));
    }
  }
}

TEST_CASE("constrain_output_not complements constrain_output_is") {
  ModelSpec m = satx::testing::and_model();
  EncodedModel em = encode_model(m);
  Lit not0 = constrain_output_not(em, 0);
  Lit is1 = constrain_output_is(em, 1);
  // With two classes, not-0 and is-1 accept exactly the same inputs.
  for (unsigned pattern = 0; pattern < 16; ++pattern) {
    std::vector<Lit> base;
    int j = 0;
    for (int d = 0; d < 2; ++d)
      for (int b = 0; b < 2; ++b, ++j) {
        int32_t v = em.input_vars[0][d][b];
        base.push_back(((pattern >> j) & 1) ? v : -v);
      }
    auto with = [&](Lit g) {
      auto a = base;
      a.push_back(g);
      return oracle::dpll_reference(em.formula, a).sat();
    };
    CHECK(with(not0) == with(is1));
  }
}

TEST_CASE("single-class models") {
  ModelSpec m = satx::testing::paper_neuron_model();  // C = 1
  EncodedModel em = encode_model(m);
  Lit is0 = constrain_output_is(em, 0);
  Solver s;
  s.add_formula(em.formula);
  CHECK(s.solve(std::vector<Lit>{is0}).sat());  // trivially true

  Lit not0 = constrain_output_not(em, 0);
  Solver s2;
  s2.add_formula(em.formula);
  CHECK(s2.solve(std::vector<Lit>{not0}).unsat());  // unsatisfiable by construction

  CHECK_THROWS_AS(constrain_output_is(em, 1), std::invalid_argument);
  CHECK_THROWS_AS(constrain_output_not(em, -1), std::invalid_argument);
}

TEST_CASE("guarded constraints impose nothing until assumed") {
  ModelSpec m = satx::testing::and_model();
  EncodedModel em = encode_model(m);
  VideoFeatureSequence input = features_of({1.0, 1.0}, 1, 2);
  int cls = predict(m, input);
  CHECK(cls == 1);

  Solver before;
  before.add_formula(em.formula);
  REQUIRE(before.solve(input_assumptions(em, input)).sat());

  // Add every kind of guarded constraint, assume none of them.
  constrain_output_is(em, 0);
  constrain_output_not(em, 1);
  const FlipSet& flips = flip_variables(em, input, Granularity::Bits);
  cardinality_at_most(em, flips, 0);

  Solver after;
  after.add_formula(em.formula);
  CHECK(after.solve(input_assumptions(em, input)).sat());  // verdict unchanged
}

TEST_CASE("flip variables count the Hamming distance") {
  ModelSpec m = satx::testing::quad_model();
  EncodedModel em = encode_model(m);
  VideoFeatureSequence original = features_of({1.0, 0.0, -1.0, 1.0}, 2, 2);
  const FlipSet& bits = flip_variables(em, original, Granularity::Bits);
  const FlipSet& feats = flip_variables(em, original, Granularity::Features);
  REQUIRE(bits.indicator_vars.size() == 8);
  REQUIRE(feats.indicator_vars.size() == 4);

  Solver s;
  s.add_formula(em.formula);

  // Forcing the original input makes every indicator false.
  auto base = input_assumptions(em, original);
  auto r = s.solve(base);
  REQUIRE(r.sat());
  for (int32_t v : bits.indicator_vars) CHECK_FALSE(r.model.value(v));
  for (int32_t v : feats.indicator_vars) CHECK_FALSE(r.model.value(v));

  // Negating exactly one input bit raises exactly one bit flip and one
  // feature change.
  auto one_off = base;
  one_off[3] = -one_off[3];
  r = s.solve(one_off);
  REQUIRE(r.sat());
  int bit_count = 0, feat_count = 0;
  for (int32_t v : bits.indicator_vars) bit_count += r.model.value(v);
  for (int32_t v : feats.indicator_vars) feat_count += r.model.value(v);
  CHECK(bit_count == 1);
  CHECK(feat_count == 1);

  // Random modified inputs: indicator counts equal the Hamming distances.
  std::mt19937_64 rng(1234);
  for (int iter = 0; iter < 30; ++iter) {
    auto flipped = base;
    int expect_bits = 0;
    std::set<int> changed_cells;
    for (std::size_t j = 0; j < flipped.size(); ++j) {
      if (rng() % 3 == 0) {
        flipped[j] = -flipped[j];
        ++expect_bits;
        changed_cells.insert(static_cast<int>(j / 2));  // 2 bits per cell
      }
    }
    r = s.solve(flipped);
    REQUIRE(r.sat());
    bit_count = 0;
    feat_count = 0;
    for (int32_t v : bits.indicator_vars) bit_count += r.model.value(v);
    for (int32_t v : feats.indicator_vars) feat_count += r.model.value(v);
    CHECK(bit_count == expect_bits);
    CHECK(feat_count == static_cast<int>(changed_cells.size()));
  }
}

TEST_CASE("cardinality constraint is exact on six indicators") {
  // Six free bits of a 3-feature model at 2-bit precision, bit granularity.
  ModelSpec m;
  m.input_frames = 1;
  m.input_features = 3;
  m.num_classes = 1;
  m.activation_format = {2, 0};
  m.layers.push_back(FlattenLayer{});
  m.layers.push_back(DenseLayer{{{0.0, 0.0, 0.0}}, {0.0}});
  EncodedModel em = encode_model(m);
  VideoFeatureSequence original = features_of({0.0, 0.0, 0.0}, 1, 3);
  const FlipSet& flips = flip_variables(em, original, Granularity::Bits);
  REQUIRE(flips.indicator_vars.size() == 6);

  for (int k = 0; k <= 6; ++k) {
    Lit guard = cardinality_at_most(em, flips, k);
    for (unsigned pattern = 0; pattern < 64; ++pattern) {
      std::vector<Lit> assumptions{guard};
      int weight = 0;
      for (int j = 0; j < 6; ++j) {
        int32_t v = flips.indicator_vars[j];
        bool on = (pattern >> j) & 1;
        weight += on;
        assumptions.push_back(on ? v : -v);
      }
      bool sat = oracle::dpll_reference(em.formula, assumptions).sat();
      CHECK(sat == (weight <= k));
    }
  }
  CHECK_THROWS_AS(cardinality_at_most(em, flips, 7), std::invalid_argument);
  CHECK_THROWS_AS(cardinality_at_most(em, flips, -1), std::invalid_argument);
}

TEST_CASE("cardinality bounds are monotone") {
  ModelSpec m = satx::testing::quad_model();
  EncodedModel em = encode_model(m);
  VideoFeatureSequence original = features_of({1.0, 1.0, 0.0, 0.0}, 2, 2);
  const FlipSet& flips = flip_variables(em, original, Granularity::Bits);
  Lit target = constrain_output_is(em, 2);
  bool seen_sat = false;
  for (int k = 0; k <= static_cast<int>(flips.indicator_vars.size()); ++k) {
    Lit guard = cardinality_at_most(em, flips, k);
    Solver fresh;
    fresh.add_formula(em.formula);
    bool sat = fresh.solve(std::vector<Lit>{target, guard}).sat();
    if (seen_sat) CHECK(sat);  // Sat at k implies Sat at every larger bound
    seen_sat = seen_sat || sat;
  }
  CHECK(seen_sat);
}

TEST_CASE("every encoded variable has exactly one role and input roles are unique") {
  ModelSpec m = load_model(data_file("fixture_model.json"));
  EncodedModel em = encode_model(m);
  CHECK(em.varmap.num_vars() == em.formula.num_vars);
  std::set<std::tuple<int, int, int>> inputs;
  for (int32_t v = 1; v <= em.varmap.num_vars(); ++v) {
    const VarRole& role = em.varmap.role(v);
    if (role.kind == VarKind::InputFeatureBit)
      CHECK(inputs.insert({role.a, role.b, role.c}).second);
  }
  CHECK(static_cast<int>(inputs.size()) == em.input_bit_count());
  // Folded weights and biases are recorded in the constants ledger.
  CHECK_FALSE(em.varmap.constants().empty());
}

TEST_CASE("unsupported and mismatched shapes are rejected") {
  ModelSpec bad;
  bad.input_frames = 1;
  bad.input_features = 2;
  bad.num_classes = 2;
  bad.layers.push_back(DenseLayer{{{1.0, 2.0}, {3.0}}, {0.0, 0.0}});
  CHECK_THROWS_AS(encode_model(bad), SchemaError);
}
