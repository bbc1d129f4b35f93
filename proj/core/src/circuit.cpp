// SPDX-License-Identifier: Apache-2.0

#include "satx/circuit.hpp"

#include <algorithm>
#include <stdexcept>

namespace satx {

namespace {
constexpr Wire kFalse = Wire::constant(false);
constexpr Wire kTrue = Wire::constant(true);
}  // namespace

BitVecSignal constant_signal(const QuantizedValue& value) {
  BitVecSignal sig;
  sig.format = value.format;
  sig.bits.reserve(value.format.total_bits);
  for (int i = 0; i < value.format.total_bits; ++i)
    sig.bits.push_back(Wire::constant(((value.mantissa >> i) & 1) != 0));
  return sig;
}

int32_t CircuitBuilder::new_var(VarRole role) {
  int32_t v = ++formula_.num_vars;
  varmap_.push(role);
  assert(v == varmap_.num_vars());
  return v;
}

void CircuitBuilder::emit(std::span<const Wire> wires) {
  std::vector<Lit> lits;
  lits.reserve(wires.size());
  for (Wire w : wires) {
    if (w.is_const()) {
      if (w.const_value()) return;  // clause already satisfied
      continue;                     // false literal contributes nothing
    }
    lits.push_back(w.to_dimacs());
  }
  formula_.add_clause(std::move(lits));
}

Wire CircuitBuilder::gate_and(Wire a, Wire b) {
  if (a == kFalse || b == kFalse) return kFalse;
  if (a == kTrue) return b;
  if (b == kTrue) return a;
  if (a == b) return a;
  if (a == ~b) return kFalse;
  Wire y = new_wire();
  emit(std::array{~a, ~b, y});
  emit(std::array{a, ~y});
  emit(std::array{b, ~y});
  return y;
}

Wire CircuitBuilder::gate_or(Wire a, Wire b) {
  if (a == kTrue || b == kTrue) return kTrue;
  if (a == kFalse) return b;
  if (b == kFalse) return a;
  if (a == b) return a;
  if (a == ~b) return kTrue;
  Wire y = new_wire();
  emit(std::array{a, b, ~y});
  emit(std::array{~a, y});
  emit(std::array{~b, y});
  return y;
}

Wire CircuitBuilder::gate_xor(Wire a, Wire b) {
  if (a == kFalse) return b;
  if (b == kFalse) return a;
  if (a == kTrue) return ~b;
  if (b == kTrue) return ~a;
  if (a == b) return kFalse;
  if (a == ~b) return kTrue;
  Wire y = new_wire();
  emit(std::array{~a, ~b, ~y});
  emit(std::array{a, b, ~y});
  emit(std::array{a, ~b, y});
  emit(std::array{~a, b, y});
  return y;
}

Wire CircuitBuilder::gate_and(std::span<const Wire> inputs) {
  std::vector<Wire> live;
  for (Wire w : inputs) {
    if (w == kFalse) return kFalse;
    if (w == kTrue) continue;
    if (std::find(live.begin(), live.end(), w) != live.end()) continue;
    if (std::find(live.begin(), live.end(), ~w) != live.end()) return kFalse;
    live.push_back(w);
  }
  if (live.empty()) return kTrue;
  if (live.size() == 1) return live.front();
  if (live.size() == 2) return gate_and(live[0], live[1]);
  Wire y = new_wire();
  std::vector<Wire> long_clause;
  for (Wire w : live) {
    emit(std::array{w, ~y});
    long_clause.push_back(~w);
  }
  long_clause.push_back(y);
  emit(long_clause);
  return y;
}

Wire CircuitBuilder::gate_or(std::span<const Wire> inputs) {
  std::vector<Wire> negated;
  negated.reserve(inputs.size());
  for (Wire w : inputs) negated.push_back(~w);
  return ~gate_and(std::span<const Wire>(negated));
}

CircuitBuilder::AdderBits CircuitBuilder::full_adder(Wire a, Wire b, Wire carry_in) {
  Wire ab = gate_xor(a, b);
  Wire sum = gate_xor(ab, carry_in);
  Wire carry = gate_or(gate_and(a, b), gate_and(ab, carry_in));
  return {sum, carry};
}

BitVecSignal CircuitBuilder::extend_to(const BitVecSignal& x, int width) const {
  assert(width >= x.width());
  BitVecSignal out = x;
  out.bits.resize(width, x.sign());
  out.format.total_bits = width;
  return out;
}

std::vector<Wire> CircuitBuilder::add_fixed_width(std::span<const Wire> a,
                                                  std::span<const Wire> b,
                                                  int width, Wire carry_in) {
  assert(static_cast<int>(a.size()) == width && static_cast<int>(b.size()) == width);
  std::vector<Wire> out(width, kFalse);
  Wire carry = carry_in;
  for (int i = 0; i < width; ++i) {
    auto fa = full_adder(a[i], b[i], carry);
    out[i] = fa.sum;
    carry = fa.carry;
  }
  return out;
}

BitVecSignal CircuitBuilder::add_signed(const BitVecSignal& a, const BitVecSignal& b) {
  if (a.format.frac_bits != b.format.frac_bits)
    throw std::invalid_argument("add_signed: operands must share frac_bits");
  int width = std::max(a.width(), b.width()) + 1;
  BitVecSignal ae = extend_to(a, width);
  BitVecSignal be = extend_to(b, width);
  BitVecSignal out;
  out.format = FixedPointFormat{width, a.format.frac_bits};
  out.bits = add_fixed_width(ae.bits, be.bits, width, kFalse);
  return out;
}

BitVecSignal CircuitBuilder::mul_by_const(const BitVecSignal& x, const QuantizedValue& w) {
  BitVecSignal out;
  out.format = widened_mul_format(x.format, w.format);
  const int width = out.format.total_bits;
  if (w.mantissa == 0) {
    out.bits.assign(width, kFalse);
    return out;
  }
  unsigned __int128 magnitude =
      w.mantissa < 0 ? static_cast<unsigned __int128>(-(w.mantissa))
                     : static_cast<unsigned __int128>(w.mantissa);
  BitVecSignal xe = extend_to(x, width);
  std::vector<Wire> acc(width, kFalse);
  for (int i = 0; i < width; ++i) {
    if (((magnitude >> i) & 1) == 0) continue;
    std::vector<Wire> addend(width, kFalse);
    for (int j = i; j < width; ++j) addend[j] = xe.bits[j - i];
    acc = add_fixed_width(acc, addend, width, kFalse);
  }
  if (w.mantissa < 0) {
    // Two's-complement negation: invert and add one via the carry-in.
    std::vector<Wire> inverted(width, kFalse);
    for (int i = 0; i < width; ++i) inverted[i] = ~acc[i];
    std::vector<Wire> zero(width, kFalse);
    acc = add_fixed_width(inverted, zero, width, kTrue);
  }
  out.bits = std::move(acc);
  return out;
}

BitVecSignal CircuitBuilder::relu(const BitVecSignal& x) {
  BitVecSignal out;
  out.format = x.format;
  Wire keep = ~x.sign();
  out.bits.reserve(x.width());
  for (Wire b : x.bits) out.bits.push_back(gate_and(b, keep));
  return out;
}

CircuitBuilder::Comparison CircuitBuilder::cmp_signed(const BitVecSignal& a,
                                                      const BitVecSignal& b) {
  if (a.format.frac_bits != b.format.frac_bits)
    throw std::invalid_argument("cmp_signed: operands must share frac_bits");
  int width = std::max(a.width(), b.width()) + 1;
  BitVecSignal ae = extend_to(a, width);
  BitVecSignal be = extend_to(b, width);
  auto subtract_sign = [&](const BitVecSignal& lhs, const BitVecSignal& rhs) {
    std::vector<Wire> inverted(width, kFalse);
    for (int i = 0; i < width; ++i) inverted[i] = ~rhs.bits[i];
    return add_fixed_width(lhs.bits, inverted, width, kTrue).back();
  };
  Wire ge = ~subtract_sign(ae, be);  // a - b >= 0
  Wire gt = subtract_sign(be, ae);   // b - a < 0
  return {gt, ge};
}

BitVecSignal CircuitBuilder::requantize(const BitVecSignal& x, FixedPointFormat fmt) {
  int shift = x.format.frac_bits - fmt.frac_bits;
  std::vector<Wire> shifted;
  if (shift >= 0) {
    assert(shift < x.width());
    shifted.assign(x.bits.begin() + shift, x.bits.end());
  } else {
    shifted.assign(-shift, kFalse);
    shifted.insert(shifted.end(), x.bits.begin(), x.bits.end());
  }
  const int inter_width = static_cast<int>(shifted.size());
  const int out_width = fmt.total_bits;
  BitVecSignal out;
  out.format = fmt;
  if (inter_width <= out_width) {
    // Every representable value fits; plain sign extension.
    Wire sign = shifted.back();
    shifted.resize(out_width, sign);
    out.bits = std::move(shifted);
    return out;
  }
  // Value fits iff all bits from out_width-1 upward agree; otherwise mux in
  // the saturated extremum of the matching sign.
  Wire sign = shifted.back();
  Wire top = shifted[out_width - 1];
  Wire fits = kTrue;
  for (int j = out_width; j < inter_width; ++j)
    fits = gate_and(fits, ~gate_xor(shifted[j], top));
  auto mux = [&](Wire sel, Wire if_true, Wire if_false) {
    return gate_or(gate_and(sel, if_true), gate_and(~sel, if_false));
  };
  out.bits.resize(out_width, kFalse);
  for (int i = 0; i < out_width - 1; ++i)
    out.bits[i] = mux(fits, shifted[i], ~sign);  // MAX has low bits set, MIN clear
  out.bits[out_width - 1] = mux(fits, shifted[out_width - 1], sign);
  return out;
}

Wire CircuitBuilder::bind(Wire w, VarRole role) {
  Wire v = new_wire(role);
  if (w.is_const()) {
    emit(std::array{w.const_value() ? v : ~v});
  } else {
    emit(std::array{~v, w});
    emit(std::array{v, ~w});
  }
  return v;
}

}  // namespace satx
