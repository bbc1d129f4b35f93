// SPDX-License-Identifier: Apache-2.0

#include "satx/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <random>
#include <thread>

#include "satx/errors.hpp"

namespace satx::oracle {

namespace {

// Local fixed-point helpers. These deliberately re-derive the reference
// semantics instead of calling into satx::quantize / widened_* so oracle
// agreement with the main path is a real check.

Mantissa clamp_to(Mantissa m, int total_bits) {
  Mantissa lo = -(Mantissa(1) << (total_bits - 1));
  Mantissa hi = (Mantissa(1) << (total_bits - 1)) - 1;
  return std::clamp(m, lo, hi);
}

Mantissa oq_quantize(double x, int total_bits, int frac_bits) {
  if (!std::isfinite(x)) throw Error("oracle quantize: non-finite input");
  double scaled = std::ldexp(x, frac_bits);
  double edge = std::ldexp(1.0, total_bits - 1);
  Mantissa rounded;
  if (scaled >= edge) {
    rounded = (Mantissa(1) << (total_bits - 1)) - 1;
  } else if (scaled <= -edge - 1.0) {
    rounded = -(Mantissa(1) << (total_bits - 1));
  } else if (scaled >= 0x1.0p62 || scaled <= -0x1.0p62) {
    rounded = static_cast<Mantissa>(scaled);  // integral at this magnitude
  } else {
    rounded = static_cast<Mantissa>(std::llround(scaled));
  }
  return clamp_to(rounded, total_bits);
}

int ceil_log2(std::size_t count) {
  return count >= 2
             ? std::bit_width(static_cast<unsigned long long>(count - 1))
             : 0;
}

}  // namespace

std::vector<Mantissa> quantize_input(const ModelSpec& model,
                                     const VideoFeatureSequence& input) {
  std::vector<Mantissa> out;
  out.reserve(input.values.size());
  for (double v : input.values)
    out.push_back(oq_quantize(v, model.activation_format.total_bits,
                              model.activation_format.frac_bits));
  return out;
}

std::vector<Mantissa> reference_forward(const ModelSpec& model,
                                        std::span<const Mantissa> input_mantissas) {
  auto shapes = model.shapes();
  const int na = model.activation_format.total_bits;
  const int fa = model.activation_format.frac_bits;
  const int nw = model.weight_format.total_bits;
  const int fw = model.weight_format.frac_bits;

  std::vector<Mantissa> act(input_mantissas.begin(), input_mantissas.end());

  auto neuron = [&](Mantissa dot, std::size_t term_count, double bias) {
    int acc_bits = nw + na + ceil_log2(term_count);
    Mantissa with_bias = dot + oq_quantize(bias, acc_bits, fw + fa);
    Mantissa shifted = fw > 0 ? (with_bias >> fw) : with_bias;
    return clamp_to(shifted, na);
  };

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const GridShape in_shape = shapes[li];
    const GridShape out_shape = shapes[li + 1];
    const LayerSpec& layer = model.layers[li];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      std::vector<Mantissa> next(out_shape.cols, 0);
      for (int j = 0; j < out_shape.cols; ++j) {
        Mantissa dot = 0;
        for (int k = 0; k < in_shape.cols; ++k)
          dot += oq_quantize(dense->weights[j][k], nw, fw) * act[k];
        next[j] = neuron(dot, in_shape.cols, dense->bias[j]);
      }
      act = std::move(next);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (Mantissa& m : act)
        if (m < 0) m = 0;
    } else if (const auto* step = std::get_if<ThresholdStepLayer>(&layer)) {
      Mantissa thr = oq_quantize(step->threshold, na, fa);
      Mantissa one = oq_quantize(1.0, na, fa);
      for (Mantissa& m : act) m = m >= thr ? one : 0;
    } else if (const auto* conv = std::get_if<TemporalConvLayer>(&layer)) {
      std::vector<Mantissa> next(out_shape.rows * out_shape.cols, 0);
      for (int t = 0; t < out_shape.rows; ++t) {
        for (int j = 0; j < out_shape.cols; ++j) {
          Mantissa dot = 0;
          for (int tap = 0; tap < conv->kernel_frames; ++tap)
            for (int k = 0; k < in_shape.cols; ++k)
              dot += oq_quantize(conv->weights[tap][k][j], nw, fw) *
                     act[(t + tap) * in_shape.cols + k];
          next[t * out_shape.cols + j] = neuron(
              dot, static_cast<std::size_t>(conv->kernel_frames) * in_shape.cols,
              conv->bias[j]);
        }
      }
      act = std::move(next);
    }
    // Flatten: storage layout already row-major.
  }
  return act;
}

int reference_predict(const ModelSpec& model,
                      std::span<const Mantissa> input_mantissas) {
  auto logits = reference_forward(model, input_mantissas);
  int best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = static_cast<int>(c);
  return best;
}

// ---------------------------------------------------------------------------
// Encoding fidelity.

namespace {

Mantissa cell_from_bits(uint64_t bits, int n) {
  Mantissa m = static_cast<Mantissa>(bits & ((uint64_t(1) << n) - 1));
  if ((bits >> (n - 1)) & 1) m -= Mantissa(1) << n;
  return m;
}

std::vector<Lit> pattern_assumptions(const EncodedModel& em, uint64_t pattern) {
  std::vector<Lit> out;
  out.reserve(em.input_bit_count());
  int j = 0;
  for (int t = 0; t < em.frames; ++t)
    for (int d = 0; d < em.features; ++d)
      for (int b = 0; b < em.activation_format.total_bits; ++b, ++j) {
        int32_t v = em.input_vars[t][d][b];
        out.push_back(((pattern >> j) & 1) != 0 ? v : -v);
      }
  return out;
}

VideoFeatureSequence pattern_features(const EncodedModel& em, uint64_t pattern) {
  VideoFeatureSequence seq = VideoFeatureSequence::zeros(em.frames, em.features);
  const int n = em.activation_format.total_bits;
  int j = 0;
  for (int t = 0; t < em.frames; ++t)
    for (int d = 0; d < em.features; ++d, j += n) {
      Mantissa m = cell_from_bits(pattern >> j, n);
      seq.at(t, d) = dequantize(QuantizedValue{em.activation_format, m});
    }
  return seq;
}

FidelityReport run_fidelity(const ModelSpec& model, const EncodedModel& em,
                            const std::function<uint64_t(uint64_t)>& pattern_at,
                            uint64_t count, bool exhaustive, int jobs) {
  FidelityReport report;
  report.inputs_checked = count;
  report.exhaustive = exhaustive;

  int workers = std::max(1, jobs);
  workers = static_cast<int>(
      std::min<uint64_t>(workers, std::max<uint64_t>(1, count)));

  std::vector<std::vector<FidelityMismatch>> found(workers);
  auto work = [&](int w) {
    Solver solver;
    solver.add_formula(em.formula);
    uint64_t begin = count * w / workers;
    uint64_t end = count * (w + 1) / workers;
    for (uint64_t i = begin; i < end; ++i) {
      uint64_t pattern = pattern_at(i);
      auto assumptions = pattern_assumptions(em, pattern);
      SolveResult r = solver.solve(assumptions);
      VideoFeatureSequence features = pattern_features(em, pattern);
      auto expected_q = quantized_forward(model, features);
      std::vector<Mantissa> expected;
      expected.reserve(expected_q.size());
      for (const auto& q : expected_q) expected.push_back(q.mantissa);
      if (!r.sat()) {
        found[w].push_back(FidelityMismatch{pattern, expected, {}, true});
        continue;
      }
      auto circuit = decode_logits(em, r.model);
      if (circuit != expected)
        found[w].push_back(FidelityMismatch{pattern, expected, circuit, false});
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  for (auto& chunk : found)
    report.mismatches.insert(report.mismatches.end(), chunk.begin(), chunk.end());
  return report;
}

}  // namespace

FidelityReport exhaustive_fidelity(const ModelSpec& model, const EncodedModel& em,
                                   int jobs) {
  int bits = em.input_bit_count();
  if (bits > 20)
    throw GuardError("exhaustive fidelity refuses " + std::to_string(bits) +
                     " input bits (limit 20); use sampled_fidelity");
  uint64_t total = uint64_t(1) << bits;
  return run_fidelity(
      model, em, [](uint64_t i) { return i; }, total, true, jobs);
}

FidelityReport sampled_fidelity(const ModelSpec& model, const EncodedModel& em,
                                uint64_t samples, uint64_t seed, int jobs) {
  int bits = em.input_bit_count();
  if (bits > 62)
    throw GuardError("sampled fidelity supports at most 62 input bits");
  std::mt19937_64 rng(seed);
  uint64_t mask = (uint64_t(1) << bits) - 1;
  std::vector<uint64_t> patterns(samples);
  for (auto& p : patterns) p = rng() & mask;
  return run_fidelity(
      model, em, [&patterns](uint64_t i) { return patterns[i]; }, samples, false,
      jobs);
}

// ---------------------------------------------------------------------------
// Reference DPLL.

namespace {

struct Dpll {
  std::vector<std::vector<Lit>> clauses;
  std::vector<int8_t> assign;  // 1..n
  std::vector<int32_t> trail;

  int8_t value(Lit l) const {
    int8_t v = assign[lit_var(l)];
    return l < 0 ? static_cast<int8_t>(-v) : v;
  }
  bool enqueue(Lit l) {
    int8_t v = value(l);
    if (v == 1) return true;
    if (v == -1) return false;
    assign[lit_var(l)] = l > 0 ? 1 : -1;
    trail.push_back(lit_var(l));
    return true;
  }
  void undo(std::size_t mark) {
    while (trail.size() > mark) {
      assign[trail.back()] = 0;
      trail.pop_back();
    }
  }
  bool propagate() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& clause : clauses) {
        Lit unit = 0;
        int unassigned = 0;
        bool sat = false;
        for (Lit l : clause) {
          int8_t v = value(l);
          if (v == 1) {
            sat = true;
            break;
          }
          if (v == 0) {
            ++unassigned;
            unit = l;
            if (unassigned > 1) break;
          }
        }
        if (sat || unassigned > 1) continue;
        if (unassigned == 0) return false;
        if (!enqueue(unit)) return false;
        changed = true;
      }
    }
    return true;
  }
  bool search() {
    std::size_t mark = trail.size();
    if (!propagate()) {
      undo(mark);
      return false;
    }
    int32_t var = 0;
    for (int32_t v = 1; v < static_cast<int32_t>(assign.size()); ++v) {
      if (assign[v] == 0) {
        var = v;
        break;
      }
    }
    if (var == 0) return true;
    for (int8_t phase : {int8_t(1), int8_t(-1)}) {
      std::size_t branch_mark = trail.size();
      assign[var] = phase;
      trail.push_back(var);
      if (search()) return true;
      undo(branch_mark);
    }
    undo(mark);
    return false;
  }
};

}  // namespace

SolveResult dpll_reference(const CnfFormula& formula,
                           std::span<const Lit> assumptions) {
  Dpll dpll;
  dpll.clauses = formula.clauses;
  for (Lit a : assumptions) dpll.clauses.push_back({a});
  dpll.assign.assign(formula.num_vars + 1, 0);
  if (!dpll.search()) return SolveResult{SolveStatus::Unsat, {}};
  Assignment model(formula.num_vars);
  for (int32_t v = 1; v <= formula.num_vars; ++v)
    model.set(v, dpll.assign[v] > 0);  // untouched vars default to false
  return SolveResult{SolveStatus::Sat, std::move(model)};
}

// ---------------------------------------------------------------------------
// Brute-force explanation oracles.

std::optional<int> brute_force_min_cxp(const ModelSpec& model,
                                       const VideoFeatureSequence& input,
                                       int target_class, Granularity granularity) {
  const int n = model.activation_format.total_bits;
  const int cells = model.input_frames * model.input_features;
  const int bits = cells * n;
  if (bits > 12)
    throw GuardError("brute_force_min_cxp refuses " + std::to_string(bits) +
                     " input bits (limit 12)");

  auto original = quantize_input(model, input);
  uint64_t orig_pattern = 0;
  for (int cell = 0; cell < cells; ++cell) {
    uint64_t low = static_cast<uint64_t>(original[cell] & ((Mantissa(1) << n) - 1));
    orig_pattern |= low << (cell * n);
  }

  std::optional<int> best;
  const uint64_t total = uint64_t(1) << bits;
  for (uint64_t pattern = 0; pattern < total; ++pattern) {
    std::vector<Mantissa> cellsv(cells);
    for (int cell = 0; cell < cells; ++cell)
      cellsv[cell] = cell_from_bits(pattern >> (cell * n), n);
    if (reference_predict(model, cellsv) != target_class) continue;
    int cost = 0;
    if (granularity == Granularity::Bits) {
      cost = std::popcount(pattern ^ orig_pattern);
    } else {
      for (int cell = 0; cell < cells; ++cell) {
        uint64_t mask = ((uint64_t(1) << n) - 1) << (cell * n);
        if ((pattern & mask) != (orig_pattern & mask)) ++cost;
      }
    }
    if (!best || cost < *best) best = cost;
  }
  return best;
}

bool brute_force_axp_check(const ModelSpec& model, const VideoFeatureSequence& input,
                           std::span<const std::pair<int, int>> fixed_features,
                           int cls) {
  const int n = model.activation_format.total_bits;
  const int cells = model.input_frames * model.input_features;
  std::vector<bool> fixed(cells, false);
  for (auto [t, d] : fixed_features) {
    if (t < 0 || t >= model.input_frames || d < 0 || d >= model.input_features)
      throw std::invalid_argument("feature index out of range");
    fixed[t * model.input_features + d] = true;
  }
  int free_cells = 0;
  for (int cell = 0; cell < cells; ++cell)
    if (!fixed[cell]) ++free_cells;
  const int free_bits = free_cells * n;
  if (free_bits > 20)
    throw GuardError("brute_force_axp_check refuses " + std::to_string(free_bits) +
                     " free bits (limit 20)");

  auto original = quantize_input(model, input);
  const uint64_t total = uint64_t(1) << free_bits;
  std::vector<Mantissa> candidate(original.begin(), original.end());
  for (uint64_t pattern = 0; pattern < total; ++pattern) {
    int offset = 0;
    for (int cell = 0; cell < cells; ++cell) {
      if (fixed[cell]) continue;
      candidate[cell] = cell_from_bits(pattern >> offset, n);
      offset += n;
    }
    if (reference_predict(model, candidate) != cls) return false;
  }
  return true;
}

}  // namespace satx::oracle
