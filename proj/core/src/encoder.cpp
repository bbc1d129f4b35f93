// SPDX-License-Identifier: Apache-2.0

#include "satx/encoder.hpp"

#include <cassert>
#include <stdexcept>

#include "satx/errors.hpp"

namespace satx {

namespace {

std::string idx(int i) { return "[" + std::to_string(i) + "]"; }

// Shared neuron body: constant-weight products, an exact adder chain, the
// bias folded at the reference accumulator format, then requantize. Mirrors
// quantized_forward's neuron helper operation for operation.
BitVecSignal encode_neuron(CircuitBuilder& cb, VarMap& varmap,
                           const std::vector<BitVecSignal>& inputs,
                           const std::vector<QuantizedValue>& weights,
                           double bias, const std::string& bias_name,
                           FixedPointFormat weight_fmt, FixedPointFormat act_fmt) {
  assert(inputs.size() == weights.size() && !inputs.empty());
  FixedPointFormat term_fmt = widened_mul_format(weight_fmt, act_fmt);
  std::vector<BitVecSignal> terms;
  terms.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    terms.push_back(cb.mul_by_const(inputs[i], weights[i]));
  BitVecSignal acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = cb.add_signed(acc, terms[i]);

  FixedPointFormat acc_fmt = widened_sum_format(term_fmt, terms.size());
  QuantizedValue bias_q = quantize(bias, acc_fmt);
  varmap.record_constant(bias_name, bias_q);
  acc = cb.add_signed(acc, constant_signal(bias_q));
  return cb.requantize(acc, act_fmt);
}

template <typename RoleOfBit>
BitVecSignal bind_signal(CircuitBuilder& cb, const BitVecSignal& sig,
                         RoleOfBit role_of_bit) {
  BitVecSignal out;
  out.format = sig.format;
  out.bits.reserve(sig.bits.size());
  for (int bit = 0; bit < sig.width(); ++bit)
    out.bits.push_back(cb.bind(sig.bits[bit], role_of_bit(bit)));
  return out;
}

Mantissa mantissa_from_bits(const EncodedModel& em, const Assignment& model,
                            const std::vector<int32_t>& vars) {
  Mantissa m = 0;
  (void)em;
  int n = static_cast<int>(vars.size());
  for (int i = 0; i < n; ++i)
    if (model.value(vars[i])) m += Mantissa(1) << i;
  if (model.value(vars[n - 1])) m -= Mantissa(1) << n;  // sign bit weight
  return m;
}

}  // namespace

EncodedModel encode_model(const ModelSpec& model) {
  auto shapes = model.shapes();  // also validates
  EncodedModel em;
  em.frames = model.input_frames;
  em.features = model.input_features;
  em.num_classes = model.num_classes;
  em.activation_format = model.activation_format;

  CircuitBuilder cb(em.formula, em.varmap);
  const FixedPointFormat act_fmt = model.activation_format;
  const FixedPointFormat w_fmt = model.weight_format;

  // Input grid: one free variable per (frame, feature, bit).
  em.input_vars.assign(
      em.frames, std::vector<std::vector<int32_t>>(
                     em.features, std::vector<int32_t>(act_fmt.total_bits, 0)));
  std::vector<BitVecSignal> act;
  act.reserve(em.frames * em.features);
  for (int t = 0; t < em.frames; ++t) {
    for (int d = 0; d < em.features; ++d) {
      BitVecSignal sig;
      sig.format = act_fmt;
      for (int b = 0; b < act_fmt.total_bits; ++b) {
        int32_t v = cb.new_var(VarRole{VarKind::InputFeatureBit, t, d, b});
        em.input_vars[t][d][b] = v;
        sig.bits.push_back(Wire::from_var(v));
      }
      act.push_back(sig);
    }
  }

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const GridShape in_shape = shapes[li];
    const GridShape out_shape = shapes[li + 1];
    const LayerSpec& layer = model.layers[li];
    const std::string prefix = "layers" + idx(static_cast<int>(li));
    std::vector<BitVecSignal> next;

    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      next.reserve(out_shape.cols);
      for (int j = 0; j < out_shape.cols; ++j) {
        std::vector<QuantizedValue> weights;
        weights.reserve(in_shape.cols);
        for (int k = 0; k < in_shape.cols; ++k) {
          QuantizedValue wq = quantize(dense->weights[j][k], w_fmt);
          em.varmap.record_constant(prefix + ".weights" + idx(j) + idx(k), wq);
          weights.push_back(wq);
        }
        next.push_back(encode_neuron(cb, em.varmap, act, weights, dense->bias[j],
                                     prefix + ".bias" + idx(j), w_fmt, act_fmt));
      }
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      next.reserve(act.size());
      for (const auto& sig : act) next.push_back(cb.relu(sig));
    } else if (const auto* step = std::get_if<ThresholdStepLayer>(&layer)) {
      QuantizedValue thr = quantize(step->threshold, act_fmt);
      QuantizedValue one = quantize(1.0, act_fmt);
      em.varmap.record_constant(prefix + ".threshold", thr);
      BitVecSignal thr_sig = constant_signal(thr);
      next.reserve(act.size());
      for (const auto& sig : act) {
        Wire ge = cb.cmp_signed(sig, thr_sig).ge;
        BitVecSignal out;
        out.format = act_fmt;
        for (int b = 0; b < act_fmt.total_bits; ++b)
          out.bits.push_back(((one.mantissa >> b) & 1) != 0 ? ge
                                                            : Wire::constant(false));
        next.push_back(out);
      }
    } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
      next.reserve(out_shape.rows * out_shape.cols);
      for (int t = 0; t < out_shape.rows; ++t) {
        for (int j = 0; j < out_shape.cols; ++j) {
          std::vector<BitVecSignal> window;
          std::vector<QuantizedValue> weights;
          window.reserve(conv->kernel_frames * in_shape.cols);
          for (int tap = 0; tap < conv->kernel_frames; ++tap) {
            for (int k = 0; k < in_shape.cols; ++k) {
              window.push_back(act[(t + tap) * in_shape.cols + k]);
              QuantizedValue wq = quantize(conv->weights[tap][k][j], w_fmt);
              em.varmap.record_constant(
                  prefix + ".kernel" + idx(tap) + idx(k) + idx(j), wq);
              weights.push_back(wq);
            }
          }
          next.push_back(encode_neuron(cb, em.varmap, window, weights,
                                       conv->bias[j], prefix + ".bias" + idx(j),
                                       w_fmt, act_fmt));
        }
      }
    } else {
      // Flatten: row-major storage already matches the flattened order.
      next = act;
    }

    // Observable layer boundary, except that the final signals are bound as
    // output logits below and shape-only layers add nothing.
    bool is_last = li + 1 == model.layers.size();
    if (!is_last && !std::holds_alternative<FlattenLayer>(layer)) {
      for (std::size_t u = 0; u < next.size(); ++u)
        next[u] = bind_signal(cb, next[u], [&](int bit) {
          return VarRole{VarKind::ActivationBit, static_cast<int>(li),
                         static_cast<int>(u), bit};
        });
    }
    act = std::move(next);
  }

  em.logit_signals.reserve(em.num_classes);
  for (int c = 0; c < em.num_classes; ++c)
    em.logit_signals.push_back(bind_signal(cb, act[c], [&](int bit) {
      return VarRole{VarKind::OutputLogitBit, c, bit, -1};
    }));
  return em;
}

std::vector<Lit> input_assumptions(const EncodedModel& em,
                                   const VideoFeatureSequence& input) {
  if (input.frames != em.frames || input.features != em.features)
    throw SchemaError("input shape does not match the encoded model");
  std::vector<Lit> out;
  out.reserve(em.input_bit_count());
  for (int t = 0; t < em.frames; ++t) {
    for (int d = 0; d < em.features; ++d) {
      QuantizedValue q = quantize(input.at(t, d), em.activation_format);
      for (int b = 0; b < em.activation_format.total_bits; ++b) {
        int32_t v = em.input_vars[t][d][b];
        out.push_back(((q.mantissa >> b) & 1) != 0 ? v : -v);
      }
    }
  }
  return out;
}

namespace {

const EncodedModel::PairComparison& pair_comparison(EncodedModel& em, int lo, int hi) {
  assert(lo < hi);
  auto key = std::make_pair(lo, hi);
  auto it = em.cmp_cache.find(key);
  if (it != em.cmp_cache.end()) return it->second;
  CircuitBuilder cb(em.formula, em.varmap);
  auto cmp = cb.cmp_signed(em.logit_signals[lo], em.logit_signals[hi]);
  return em.cmp_cache.emplace(key, EncodedModel::PairComparison{cmp.gt, cmp.ge})
      .first->second;
}

// logit[a] > logit[b] / logit[a] >= logit[b] on exact integers, derived from
// the cached ordered pair: a > b <=> !(b >= a).
Wire cmp_gt(EncodedModel& em, int a, int b) {
  return a < b ? pair_comparison(em, a, b).gt : ~pair_comparison(em, b, a).ge;
}
Wire cmp_ge(EncodedModel& em, int a, int b) {
  return a < b ? pair_comparison(em, a, b).ge : ~pair_comparison(em, b, a).gt;
}

// argmax == cls under the lowest-index tie-break.
Wire argmax_is(EncodedModel& em, int cls) {
  auto it = em.argmax_wire.find(cls);
  if (it != em.argmax_wire.end()) return it->second;
  CircuitBuilder cb(em.formula, em.varmap);
  std::vector<Wire> conds;
  conds.reserve(em.num_classes - 1);
  for (int k = 0; k < em.num_classes; ++k) {
    if (k == cls) continue;
    conds.push_back(k < cls ? cmp_gt(em, cls, k) : cmp_ge(em, cls, k));
  }
  Wire w = cb.gate_and(std::span<const Wire>(conds));
  em.argmax_wire.emplace(cls, w);
  return w;
}

void check_class(const EncodedModel& em, int cls) {
  if (cls < 0 || cls >= em.num_classes)
    throw std::invalid_argument("class " + std::to_string(cls) +
                                " out of range [0," +
                                std::to_string(em.num_classes) + ")");
}

}  // namespace

Lit constrain_output_is(EncodedModel& em, int cls) {
  check_class(em, cls);
  auto it = em.output_is_guard.find(cls);
  if (it != em.output_is_guard.end()) return it->second;
  CircuitBuilder cb(em.formula, em.varmap);
  Wire guard = cb.new_wire();
  for (int k = 0; k < em.num_classes; ++k) {
    if (k == cls) continue;
    Wire cond = k < cls ? cmp_gt(em, cls, k) : cmp_ge(em, cls, k);
    cb.emit(std::array{~guard, cond});
  }
  Lit g = guard.to_dimacs();
  em.output_is_guard.emplace(cls, g);
  return g;
}

Lit constrain_output_not(EncodedModel& em, int cls) {
  check_class(em, cls);
  auto it = em.output_not_guard.find(cls);
  if (it != em.output_not_guard.end()) return it->second;
  // Exactly one class is the argmax, so "not cls" is the disjunction of the
  // other argmax indicators; with one class the disjunction is empty and
  // assuming the guard is immediately unsatisfiable.
  std::vector<Wire> others;
  for (int k = 0; k < em.num_classes; ++k)
    if (k != cls) others.push_back(argmax_is(em, k));
  CircuitBuilder cb(em.formula, em.varmap);
  Wire guard = cb.new_wire();
  std::vector<Wire> clause;
  clause.push_back(~guard);
  clause.insert(clause.end(), others.begin(), others.end());
  cb.emit(clause);
  Lit g = guard.to_dimacs();
  em.output_not_guard.emplace(cls, g);
  return g;
}

const FlipSet& flip_variables(EncodedModel& em, const VideoFeatureSequence& original,
                              Granularity granularity) {
  if (original.frames != em.frames || original.features != em.features)
    throw SchemaError("input shape does not match the encoded model");
  std::vector<int64_t> mantissas;
  mantissas.reserve(em.frames * em.features);
  for (int t = 0; t < em.frames; ++t)
    for (int d = 0; d < em.features; ++d)
      mantissas.push_back(static_cast<int64_t>(
          quantize(original.at(t, d), em.activation_format).mantissa));

  auto key = std::make_pair(granularity == Granularity::Bits ? 0 : 1, mantissas);
  auto it = em.flip_cache.find(key);
  if (it != em.flip_cache.end()) return it->second;

  CircuitBuilder cb(em.formula, em.varmap);
  FlipSet fs;
  fs.granularity = granularity;
  fs.original_mantissas = mantissas;
  const int bits = em.activation_format.total_bits;
  for (int t = 0; t < em.frames; ++t) {
    for (int d = 0; d < em.features; ++d) {
      int64_t m = mantissas[t * em.features + d];
      std::vector<Wire> cell_flips;
      cell_flips.reserve(bits);
      for (int b = 0; b < bits; ++b) {
        Wire input = Wire::from_var(em.input_vars[t][d][b]);
        bool orig = ((m >> b) & 1) != 0;
        Wire q = cb.new_wire(VarRole{VarKind::FlipIndicator, t, d, b});
        // q <-> (input != original bit)
        Wire differs = orig ? ~input : input;
        cb.emit(std::array{~q, differs});
        cb.emit(std::array{q, ~differs});
        cell_flips.push_back(q);
        if (granularity == Granularity::Bits) {
          fs.indicator_vars.push_back(q.var());
          fs.labels.push_back({t, d, b});
        }
      }
      if (granularity == Granularity::Features) {
        Wire r = cb.new_wire(VarRole{VarKind::FlipIndicator, t, d, -1});
        std::vector<Wire> long_clause{~r};
        for (Wire q : cell_flips) {
          cb.emit(std::array{~q, r});
          long_clause.push_back(q);
        }
        cb.emit(long_clause);
        fs.indicator_vars.push_back(r.var());
        fs.labels.push_back({t, d, -1});
      }
    }
  }
  return em.flip_cache.emplace(std::move(key), std::move(fs)).first->second;
}

Lit cardinality_at_most(EncodedModel& em, const FlipSet& flips, int bound) {
  const int m = static_cast<int>(flips.indicator_vars.size());
  if (bound < 0 || bound > m)
    throw std::invalid_argument("cardinality bound out of range");
  CircuitBuilder cb(em.formula, em.varmap);
  Wire guard = cb.new_wire();
  Lit g = guard.to_dimacs();
  if (bound == m) return g;  // vacuous
  std::vector<Wire> x;
  x.reserve(m);
  for (int32_t v : flips.indicator_vars) x.push_back(Wire::from_var(v));
  if (bound == 0) {
    for (Wire xi : x) cb.emit(std::array{~guard, ~xi});
    return g;
  }

  // Sinz sequential counter: s[i][j] = "at least j+1 of x_0..x_i are true".
  const int k = bound;
  auto aux = [&]() { return cb.new_wire(VarRole{VarKind::CardinalityAux, -1, -1, -1}); };
  std::vector<std::vector<Wire>> s(m - 1, std::vector<Wire>(k));
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < k; ++j) s[i][j] = aux();

  cb.emit(std::array{~guard, ~x[0], s[0][0]});
  for (int j = 1; j < k; ++j) cb.emit(std::array{~guard, ~s[0][j]});
  for (int i = 1; i < m - 1; ++i) {
    cb.emit(std::array{~guard, ~x[i], s[i][0]});
    cb.emit(std::array{~guard, ~s[i - 1][0], s[i][0]});
    for (int j = 1; j < k; ++j) {
      cb.emit(std::array{~guard, ~x[i], ~s[i - 1][j - 1], s[i][j]});
      cb.emit(std::array{~guard, ~s[i - 1][j], s[i][j]});
    }
    cb.emit(std::array{~guard, ~x[i], ~s[i - 1][k - 1]});
  }
  cb.emit(std::array{~guard, ~x[m - 1], ~s[m - 2][k - 1]});
  return g;
}

std::vector<Mantissa> decode_input_mantissas(const EncodedModel& em,
                                             const Assignment& model) {
  std::vector<Mantissa> out;
  out.reserve(em.frames * em.features);
  for (int t = 0; t < em.frames; ++t)
    for (int d = 0; d < em.features; ++d)
      out.push_back(mantissa_from_bits(em, model, em.input_vars[t][d]));
  return out;
}

VideoFeatureSequence decode_input(const EncodedModel& em, const Assignment& model) {
  VideoFeatureSequence seq = VideoFeatureSequence::zeros(em.frames, em.features);
  auto ms = decode_input_mantissas(em, model);
  for (int t = 0; t < em.frames; ++t)
    for (int d = 0; d < em.features; ++d)
      seq.at(t, d) =
          dequantize(QuantizedValue{em.activation_format, ms[t * em.features + d]});
  return seq;
}

std::vector<Mantissa> decode_logits(const EncodedModel& em, const Assignment& model) {
  std::vector<Mantissa> out;
  out.reserve(em.num_classes);
  for (const auto& sig : em.logit_signals) {
    std::vector<int32_t> vars;
    vars.reserve(sig.bits.size());
    for (Wire w : sig.bits) vars.push_back(w.var());
    out.push_back(mantissa_from_bits(em, model, vars));
  }
  return out;
}

}  // namespace satx
