// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "satx/encoder.hpp"
#include "satx/model.hpp"
#include "satx/solver.hpp"

namespace satx {

// One solve of the (growing) query formula under assumptions. The internal
// backend keeps an incremental CDCL solver so learnt clauses carry across
// the many related solves of a query; the external backend shells out to a
// DIMACS solver per call. Both must return semantically identical verdicts.
class SolveBackend {
 public:
  virtual ~SolveBackend() = default;
  virtual SolveResult solve(const CnfFormula& formula,
                            std::span<const Lit> assumptions) = 0;
  virtual std::string name() const = 0;
  virtual SolverStats stats() const { return {}; }
};

class InternalBackend final : public SolveBackend {
 public:
  explicit InternalBackend(SolverConfig config = {}) : solver_(config) {}
  SolveResult solve(const CnfFormula& formula,
                    std::span<const Lit> assumptions) override;
  std::string name() const override { return "internal"; }
  SolverStats stats() const override { return solver_.stats(); }

 private:
  Solver solver_;
  std::size_t clauses_synced_ = 0;
};

class ExternalBackend final : public SolveBackend {
 public:
  explicit ExternalBackend(std::string command) : command_(std::move(command)) {}
  SolveResult solve(const CnfFormula& formula,
                    std::span<const Lit> assumptions) override;
  std::string name() const override { return "external:" + command_; }

 private:
  std::string command_;
};

// "--backend internal" or "--backend external:<command>".
std::unique_ptr<SolveBackend> make_backend(const std::string& spec,
                                           SolverConfig config = {});

enum class WhyMode { Entailment, PaperLiteral };

struct FeatureVerdict {
  int frame = 0;
  int feature = 0;
  bool kept = false;   // still fixed in the final explanation
  bool solver_sat = false;  // verdict of the deletion-step solve

  bool operator==(const FeatureVerdict&) const = default;
};

// "Why?" answer: a subset-minimal set of input features whose fixed values
// entail the prediction (entailment mode), with per-step certificates.
struct AbductiveExplanation {
  WhyMode mode = WhyMode::Entailment;
  int predicted_class = 0;
  std::vector<FeatureVerdict> verdicts;  // one per feature, in probe order
  bool final_check_unsat = false;  // entailment certificate for the final set

  std::vector<std::pair<int, int>> kept_features() const;
  bool operator==(const AbductiveExplanation&) const = default;
};

struct FlipRecord {
  FlipLabel label;
  std::string old_value;  // dequantized decimal strings
  std::string new_value;

  bool operator==(const FlipRecord&) const = default;
};

// "Why not?" answer: a minimum-cost flip set turning the prediction into
// the target class, certified minimal by the final UNSAT bound.
struct ContrastiveExplanation {
  enum class Status { Found, UnreachableClass };

  Status status = Status::Found;
  Granularity granularity = Granularity::Bits;
  int original_class = 0;
  int target_class = 0;
  int cost = 0;
  std::vector<FlipRecord> flips;
  VideoFeatureSequence modified_input;
  std::vector<std::pair<int, char>> bound_trace;  // (bound, 'S'/'U') per solve
  int certified_unsat_bound = -1;  // cost-1 when a certificate exists

  bool operator==(const ContrastiveExplanation&) const = default;
};

// Runs explanation queries against one encoded model. The deletion order
// for "why" is ascending (frame, feature) unless a shuffle seed is given.
class Explainer {
 public:
  Explainer(const ModelSpec& model, EncodedModel& encoded, SolveBackend& backend)
      : model_(model), em_(encoded), backend_(backend) {}

  AbductiveExplanation why(const VideoFeatureSequence& input,
                           WhyMode mode = WhyMode::Entailment,
                           std::optional<uint64_t> order_seed = std::nullopt);

  ContrastiveExplanation whynot(const VideoFeatureSequence& input, int target_class,
                                Granularity granularity);

  // true iff fixing the features in `fixed` to their values in `input`
  // forces the prediction to stay `cls`.
  bool check_axp(const VideoFeatureSequence& input,
                 std::span<const std::pair<int, int>> fixed, int cls);

 private:
  std::vector<Lit> assumptions_for(const VideoFeatureSequence& input,
                                   const std::vector<bool>& feature_fixed) const;

  const ModelSpec& model_;
  EncodedModel& em_;
  SolveBackend& backend_;
};

// Structured-text (JSON) reports; parse_* inverts render_* exactly.
std::string render_report(const AbductiveExplanation& explanation);
std::string render_report(const ContrastiveExplanation& explanation);
AbductiveExplanation parse_why_report(const std::string& text);
ContrastiveExplanation parse_whynot_report(const std::string& text);

}  // namespace satx
