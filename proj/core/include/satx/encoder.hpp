// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "satx/circuit.hpp"
#include "satx/cnf.hpp"
#include "satx/model.hpp"
#include "satx/varmap.hpp"

namespace satx {

enum class Granularity { Bits, Features };

struct FlipLabel {
  int frame = 0;
  int feature = 0;
  int bit = -1;  // -1 for a feature-level change indicator

  bool operator==(const FlipLabel&) const = default;
};

// Flip indicators for one original input, at bit or feature granularity.
// indicator_vars[i] is true in a model iff the corresponding bit/feature of
// the encoded input differs from the original.
struct FlipSet {
  Granularity granularity = Granularity::Bits;
  std::vector<int32_t> indicator_vars;
  std::vector<FlipLabel> labels;
  std::vector<int64_t> original_mantissas;  // row-major (t * D + d)
};

// The compiled model: CNF clauses, the role map, and the bound output
// signals. Input bits are free variables fixed only through assumptions;
// query constraints are appended lazily behind fresh activation literals,
// so one encoded model serves many incremental queries. Single-owner while
// constraints are being added; safe to share read-only afterwards.
struct EncodedModel {
  CnfFormula formula;
  VarMap varmap;

  int frames = 0;
  int features = 0;
  int num_classes = 0;
  FixedPointFormat activation_format;

  std::vector<std::vector<std::vector<int32_t>>> input_vars;  // [t][d][bit]
  std::vector<BitVecSignal> logit_signals;                    // one per class

  int input_bit_count() const {
    return frames * features * activation_format.total_bits;
  }

  // Lazily built constraint machinery, keyed so repeated queries reuse the
  // same clauses and guards.
  struct PairComparison {
    Wire gt, ge;
  };
  std::map<std::pair<int, int>, PairComparison> cmp_cache;
  std::map<int, Lit> output_is_guard;
  std::map<int, Lit> output_not_guard;
  std::map<int, Wire> argmax_wire;
  std::map<std::pair<int, std::vector<int64_t>>, FlipSet> flip_cache;
};

// Compiles the full layer stack with circuit gadgets mirroring
// quantized_forward exactly (same widened formats, same requantize points);
// weights and biases are folded as constants and recorded in the varmap
// ledger. Throws SchemaError for unsupported or inconsistent layers.
EncodedModel encode_model(const ModelSpec& model);

// One assumption literal per input bit, polarity taken from the quantized
// feature mantissas.
std::vector<Lit> input_assumptions(const EncodedModel& em,
                                   const VideoFeatureSequence& input);

// Guarded clauses asserting argmax == cls under the model's tie-break
// (strict against lower classes, non-strict against higher ones). Returns
// the activation literal to assume.
Lit constrain_output_is(EncodedModel& em, int cls);

// Guarded clauses asserting argmax != cls. With a single class this is
// unsatisfiable by construction whenever assumed.
Lit constrain_output_not(EncodedModel& em, int cls);

// Defines flip indicators relating the free input bits to one original
// input. Indicators are purely definitional and constrain nothing until a
// cardinality bound over them is assumed.
const FlipSet& flip_variables(EncodedModel& em, const VideoFeatureSequence& original,
                              Granularity granularity);

// Sequential-counter encoding of (sum of indicators) <= bound, guarded by a
// fresh activation literal. 0 <= bound <= |flips|.
Lit cardinality_at_most(EncodedModel& em, const FlipSet& flips, int bound);

// Model decoding.
std::vector<Mantissa> decode_input_mantissas(const EncodedModel& em,
                                             const Assignment& model);
VideoFeatureSequence decode_input(const EncodedModel& em, const Assignment& model);
std::vector<Mantissa> decode_logits(const EncodedModel& em, const Assignment& model);

}  // namespace satx
