// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace satx {

// Mantissas of widened intermediates can exceed 64 bits (a 32x32-bit
// product summed over many terms), so exact arithmetic runs on 128 bits.
using Mantissa = __int128;

std::string mantissa_to_string(Mantissa m);
Mantissa mantissa_from_string(std::string_view s);

// Two's-complement fixed-point format: value = mantissa * 2^-frac_bits.
// Storage formats (the ones that appear in model files and on wires fed to
// quantize) are limited to 2..32 total bits; widened intermediate formats
// produced by widened_mul/widened_sum may be wider.
struct FixedPointFormat {
  int total_bits = 8;
  int frac_bits = 0;

  Mantissa min_mantissa() const { return -(Mantissa(1) << (total_bits - 1)); }
  Mantissa max_mantissa() const { return (Mantissa(1) << (total_bits - 1)) - 1; }
  double resolution() const;

  bool operator==(const FixedPointFormat&) const = default;
};

// Checked constructor for user-declared formats: 2 <= n <= 32, 0 <= f < n.
// Throws SchemaError otherwise.
FixedPointFormat storage_format(int total_bits, int frac_bits);

// Parses "n:f", e.g. "6:3". Throws SchemaError on malformed input.
FixedPointFormat parse_format(std::string_view spec);

struct QuantizedValue {
  FixedPointFormat format;
  Mantissa mantissa = 0;

  bool operator==(const QuantizedValue&) const = default;
};

// Nearest representable value, ties away from zero, saturating at the
// format's signed range. Throws on non-finite input.
QuantizedValue quantize(double x, FixedPointFormat fmt);

double dequantize(const QuantizedValue& q);

// Result formats of the exact widening operations. Exposed separately so
// the circuit encoder can fold constants into the very same formats the
// reference pass uses.
FixedPointFormat widened_mul_format(FixedPointFormat a, FixedPointFormat b);
FixedPointFormat widened_sum_format(FixedPointFormat term, std::size_t term_count);

// Exact product; result has total_bits = n_a + n_b, frac_bits = f_a + f_b.
QuantizedValue widened_mul(const QuantizedValue& a, const QuantizedValue& b);

// Exact sum of terms sharing term_format; result has total_bits =
// n + ceil(log2(m)) for m >= 2 terms (n for m <= 1), same frac_bits.
// An empty list yields zero in term_format.
QuantizedValue widened_sum(std::span<const QuantizedValue> terms,
                           FixedPointFormat term_format);

// Fraction change by arithmetic shift (floor when narrowing, exact when
// widening), then saturation to fmt's signed range.
QuantizedValue requantize(const QuantizedValue& v, FixedPointFormat fmt);

}  // namespace satx
