// SPDX-License-Identifier: Apache-2.0

#include "satx/fixed_point.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>

#include "satx/errors.hpp"

namespace satx {

namespace {

// Widened intermediates must leave one bit of headroom in __int128.
constexpr int kMaxWidenedBits = 127;

Mantissa saturate(Mantissa m, FixedPointFormat fmt) {
  return std::clamp(m, fmt.min_mantissa(), fmt.max_mantissa());
}

}  // namespace

std::string mantissa_to_string(Mantissa m) {
  if (m == 0) return "0";
  bool neg = m < 0;
  // Negate digit by digit so the minimum value does not overflow.
  std::string digits;
  Mantissa v = m;
  while (v != 0) {
    int d = static_cast<int>(v % 10);
    v /= 10;
    digits.push_back(static_cast<char>('0' + (d < 0 ? -d : d)));
  }
  if (neg) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Mantissa mantissa_from_string(std::string_view s) {
  if (s.empty()) throw SchemaError("empty mantissa string");
  bool neg = s.front() == '-';
  std::size_t i = neg ? 1 : 0;
  if (i == s.size()) throw SchemaError("bare sign is not a mantissa");
  Mantissa v = 0;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c < '0' || c > '9')
      throw SchemaError("not a mantissa: '" + std::string(s) + "'");
    v = v * 10 + (neg ? -(c - '0') : (c - '0'));
  }
  return v;
}

double FixedPointFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

FixedPointFormat storage_format(int total_bits, int frac_bits) {
  if (total_bits < 2 || total_bits > 32)
    throw SchemaError("format total bits must be in [2,32], got " +
                      std::to_string(total_bits));
  if (frac_bits < 0 || frac_bits >= total_bits)
    throw SchemaError("format frac bits must be in [0,total), got " +
                      std::to_string(frac_bits));
  return FixedPointFormat{total_bits, frac_bits};
}

FixedPointFormat parse_format(std::string_view spec) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw SchemaError("format must look like n:f, got '" + std::string(spec) + "'");
  auto to_int = [&](std::string_view part) {
    int v = 0;
    if (part.empty()) throw SchemaError("format must look like n:f");
    for (char c : part) {
      if (c < '0' || c > '9') throw SchemaError("format must look like n:f");
      v = v * 10 + (c - '0');
      if (v > 1000) break;
    }
    return v;
  };
  return storage_format(to_int(spec.substr(0, colon)), to_int(spec.substr(colon + 1)));
}

QuantizedValue quantize(double x, FixedPointFormat fmt) {
  if (!std::isfinite(x))
    throw Error("quantize: input must be finite");
  // ldexp scales by an exact power of two, so ties are decided exactly.
  double scaled = std::ldexp(x, fmt.frac_bits);
  double limit = std::ldexp(1.0, fmt.total_bits - 1);  // 2^(n-1), exact
  Mantissa m;
  if (scaled >= limit) {
    m = fmt.max_mantissa();
  } else if (scaled <= -limit - 1.0) {
    m = fmt.min_mantissa();
  } else if (scaled > -0x1.0p62 && scaled < 0x1.0p62) {
    m = static_cast<Mantissa>(std::llround(scaled));  // ties away from zero
  } else {
    // Beyond 2^62 doubles are integral, so truncation is already exact;
    // only formats wider than 63 bits can reach here.
    m = static_cast<Mantissa>(scaled);
  }
  return QuantizedValue{fmt, saturate(m, fmt)};
}

double dequantize(const QuantizedValue& q) {
  // Exact for storage formats; widened mantissas beyond 53 bits round.
  return std::ldexp(static_cast<double>(q.mantissa), -q.format.frac_bits);
}

FixedPointFormat widened_mul_format(FixedPointFormat a, FixedPointFormat b) {
  int bits = a.total_bits + b.total_bits;
  assert(bits <= kMaxWidenedBits);
  return FixedPointFormat{bits, a.frac_bits + b.frac_bits};
}

FixedPointFormat widened_sum_format(FixedPointFormat term, std::size_t term_count) {
  int extra = term_count >= 2
                  ? std::bit_width(static_cast<unsigned long long>(term_count - 1))
                  : 0;
  int bits = term.total_bits + extra;
  assert(bits <= kMaxWidenedBits);
  return FixedPointFormat{bits, term.frac_bits};
}

QuantizedValue widened_mul(const QuantizedValue& a, const QuantizedValue& b) {
  return QuantizedValue{widened_mul_format(a.format, b.format),
                        a.mantissa * b.mantissa};
}

QuantizedValue widened_sum(std::span<const QuantizedValue> terms,
                           FixedPointFormat term_format) {
  Mantissa acc = 0;
  for (const auto& t : terms) {
    if (!(t.format == term_format))
      throw std::invalid_argument("widened_sum: terms must share one format");
    acc += t.mantissa;
  }
  return QuantizedValue{widened_sum_format(term_format, terms.size()), acc};
}

QuantizedValue requantize(const QuantizedValue& v, FixedPointFormat fmt) {
  int shift = v.format.frac_bits - fmt.frac_bits;
  Mantissa m = v.mantissa;
  if (shift > 0) {
    m >>= shift;  // arithmetic shift: floor for negatives too
  } else if (shift < 0) {
    m <<= -shift;
  }
  return QuantizedValue{fmt, saturate(m, fmt)};
}

}  // namespace satx
