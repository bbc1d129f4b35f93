// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "satx/cnf.hpp"
#include "satx/encoder.hpp"
#include "satx/model.hpp"
#include "satx/solver.hpp"

namespace satx::oracle {

// Independent re-implementation of the quantized forward semantics, written
// directly over 128-bit integers with its own accumulation walk. Never
// shares the neuron code paths of model.cpp, so agreement between the two
// is evidence rather than tautology.
std::vector<Mantissa> reference_forward(const ModelSpec& model,
                                        std::span<const Mantissa> input_mantissas);

int reference_predict(const ModelSpec& model,
                      std::span<const Mantissa> input_mantissas);

// Quantization of a feature grid into input mantissas, row-major.
std::vector<Mantissa> quantize_input(const ModelSpec& model,
                                     const VideoFeatureSequence& input);

struct FidelityMismatch {
  uint64_t input_index = 0;           // bit pattern over the input variables
  std::vector<Mantissa> expected;     // reference logits
  std::vector<Mantissa> circuit;      // logits decoded from the SAT model
  bool solver_unsat = false;          // circuit rejected a total input
};

struct FidelityReport {
  uint64_t inputs_checked = 0;
  bool exhaustive = false;
  std::vector<FidelityMismatch> mismatches;

  bool pass() const { return mismatches.empty(); }
};

// Fixes every possible input bit pattern as assumptions, solves, decodes the
// output logits and compares them with quantized_forward. Hard guard: at
// most 20 input bits; larger instances are refused (use sampled_fidelity).
// jobs > 1 splits the enumeration across threads; mismatches are merged in
// ascending input order either way.
FidelityReport exhaustive_fidelity(const ModelSpec& model, const EncodedModel& em,
                                   int jobs = 1);

// Same check on `samples` seeded-random input patterns.
FidelityReport sampled_fidelity(const ModelSpec& model, const EncodedModel& em,
                                uint64_t samples, uint64_t seed, int jobs = 1);

// Plain recursive DPLL with unit propagation and no learning; the verdict
// of record for solver tests. Assumptions become unit clauses.
SolveResult dpll_reference(const CnfFormula& formula,
                           std::span<const Lit> assumptions = {});

// Minimum number of changed bits (or feature cells) turning the prediction
// into target_class, by enumerating all input patterns in ascending Hamming
// distance. nullopt = unreachable at any distance. Hard guard: 12 input bits.
std::optional<int> brute_force_min_cxp(const ModelSpec& model,
                                       const VideoFeatureSequence& input,
                                       int target_class, Granularity granularity);

// True iff every completion of the non-fixed input bits keeps the
// prediction at cls. Hard guard: at most 20 free bits.
bool brute_force_axp_check(const ModelSpec& model, const VideoFeatureSequence& input,
                           std::span<const std::pair<int, int>> fixed_features,
                           int cls);

}  // namespace satx::oracle
