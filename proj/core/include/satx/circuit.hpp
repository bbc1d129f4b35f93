// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "satx/cnf.hpp"
#include "satx/fixed_point.hpp"
#include "satx/varmap.hpp"

namespace satx {

// A wire: either a Boolean constant or a possibly-negated CNF variable.
// Constants are folded by every gate, so no emitted clause ever mentions
// them. Encoding: 0 = FALSE, 1 = TRUE, 2v / 2v+1 = +v / -v.
class Wire {
 public:
  constexpr Wire() : code_(0) {}

  static constexpr Wire constant(bool v) { return Wire(v ? 1 : 0); }
  static Wire from_var(int32_t var, bool negated = false) {
    assert(var >= 1);
    return Wire(2 * var + (negated ? 1 : 0));
  }
  static Wire from_dimacs(Lit l) { return from_var(lit_var(l), l < 0); }

  bool is_const() const { return code_ < 2; }
  bool const_value() const {
    assert(is_const());
    return code_ == 1;
  }
  int32_t var() const {
    assert(!is_const());
    return code_ >> 1;
  }
  bool negated() const {
    assert(!is_const());
    return code_ & 1;
  }
  Lit to_dimacs() const { return negated() ? -var() : var(); }

  Wire operator~() const { return Wire(code_ ^ 1); }
  bool operator==(const Wire&) const = default;

 private:
  explicit constexpr Wire(int32_t code) : code_(code) {}
  int32_t code_;
};

// Fixed-point signal: wires least-significant-bit first, two's complement,
// exactly format.total_bits of them.
struct BitVecSignal {
  std::vector<Wire> bits;
  FixedPointFormat format;

  Wire sign() const { return bits.back(); }
  int width() const { return static_cast<int>(bits.size()); }
};

BitVecSignal constant_signal(const QuantizedValue& value);

// Allocates variables and emits Tseitin clauses into a CnfFormula, tagging
// each variable's role in a VarMap. Single-owner, not thread-safe;
// independent builders may run in parallel.
class CircuitBuilder {
 public:
  CircuitBuilder(CnfFormula& formula, VarMap& varmap)
      : formula_(formula), varmap_(varmap) {}

  int32_t new_var(VarRole role);
  Wire new_wire(VarRole role = {VarKind::TseitinAux, -1, -1, -1}) {
    return Wire::from_var(new_var(role));
  }

  // Emits a clause; constant-true literals drop the clause, constant-false
  // literals drop the literal. Callers pass gate clauses verbatim.
  void emit(std::span<const Wire> wires);

  // Tseitin gates with full biconditional clauses and constant folding.
  Wire gate_and(Wire a, Wire b);
  Wire gate_or(Wire a, Wire b);
  Wire gate_not(Wire a) { return ~a; }
  Wire gate_xor(Wire a, Wire b);
  Wire gate_and(std::span<const Wire> inputs);
  Wire gate_or(std::span<const Wire> inputs);

  struct AdderBits {
    Wire sum;
    Wire carry;
  };
  AdderBits full_adder(Wire a, Wire b, Wire carry_in);

  // Signed ripple-carry addition; operands must share frac_bits. Output is
  // max(n_a, n_b) + 1 bits wide and therefore never overflows.
  BitVecSignal add_signed(const BitVecSignal& a, const BitVecSignal& b);

  // Shift-and-add multiplication by a compile-time constant, folding over
  // the set bits of |w|. Output format follows widened_mul_format.
  BitVecSignal mul_by_const(const BitVecSignal& x, const QuantizedValue& w);

  // max(0, x): every bit is masked with the negated sign bit.
  BitVecSignal relu(const BitVecSignal& x);

  struct Comparison {
    Wire gt;
    Wire ge;
  };
  // Signed comparison via subtract-and-test-sign; frac_bits must match.
  Comparison cmp_signed(const BitVecSignal& a, const BitVecSignal& b);

  // Wire-level mirror of fixedpoint requantize: arithmetic shift on the
  // fraction, then a saturation mux when the value may not fit.
  BitVecSignal requantize(const BitVecSignal& x, FixedPointFormat fmt);

  // Fresh variable constrained equal to the given wire. Used to bind
  // activation and output roles onto gadget outputs.
  Wire bind(Wire w, VarRole role);

  CnfFormula& formula() { return formula_; }
  VarMap& varmap() { return varmap_; }

 private:
  BitVecSignal extend_to(const BitVecSignal& x, int width) const;
  // Fixed-width two's-complement sum a + b + carry_in, discarding the final
  // carry. Exact whenever the true result fits in `width` bits.
  std::vector<Wire> add_fixed_width(std::span<const Wire> a,
                                    std::span<const Wire> b, int width,
                                    Wire carry_in);

  CnfFormula& formula_;
  VarMap& varmap_;
};

}  // namespace satx
