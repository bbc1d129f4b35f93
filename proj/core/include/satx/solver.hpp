// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "satx/cnf.hpp"

namespace satx {

struct SolverConfig {
  uint64_t seed = 0;
  double vsids_decay = 0.95;                   // in (0,1)
  int restart_base = 64;                       // Luby unit, >= 1
  int keep_lbd = 3;                            // learnt clauses at or below live forever
  std::optional<uint64_t> conflict_budget;     // nullopt = unbounded
};

enum class SolveStatus { Sat, Unsat, BudgetExhausted };

struct SolveResult {
  SolveStatus status = SolveStatus::Unsat;
  Assignment model;  // total iff status == Sat; self-checked before return

  bool sat() const { return status == SolveStatus::Sat; }
  bool unsat() const { return status == SolveStatus::Unsat; }
};

struct SolverStats {
  uint64_t solves = 0;
  uint64_t decisions = 0;
  uint64_t propagations = 0;
  uint64_t conflicts = 0;
  uint64_t restarts = 0;
  uint64_t learned = 0;
  uint64_t deleted = 0;
};

// Conflict-driven clause learning with two watched literals, VSIDS decision
// ordering, phase saving, 1-UIP learning with non-chronological backjumping,
// Luby restarts and LBD-based learnt-clause deletion. Assumptions are
// installed as the first decisions, so learnt clauses persist across calls
// and related queries stay incremental.
//
// Deterministic: a fixed seed and a fixed clause insertion order produce
// identical verdicts and identical models.
class Solver {
 public:
  explicit Solver(SolverConfig config = {});

  void ensure_vars(int32_t n);
  int32_t num_vars() const { return static_cast<int32_t>(assign_.size()) - 1; }

  // Returns false when the clause was a tautology (rejected). Throws on a
  // literal outside the declared variable bound.
  bool add_clause(std::span<const Lit> lits);
  void add_formula(const CnfFormula& formula);

  SolveResult solve(std::span<const Lit> assumptions = {});

  const SolverStats& stats() const { return stats_; }

 private:
  using ClauseRef = uint32_t;
  static constexpr ClauseRef kNoClause = UINT32_MAX;

  struct Clause {
    std::vector<Lit> lits;
    uint32_t lbd = 0;
    bool learnt = false;
    bool removed = false;
  };

  struct Watcher {
    ClauseRef cref;
    Lit blocker;
  };

  // Watch list index for a literal: 2v for +v, 2v+1 for -v.
  static std::size_t watch_index(Lit l) {
    return 2 * static_cast<std::size_t>(lit_var(l)) + (l < 0 ? 1 : 0);
  }

  int8_t value(Lit l) const {
    int8_t v = assign_[lit_var(l)];
    return l < 0 ? static_cast<int8_t>(-v) : v;
  }
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  void attach(ClauseRef cref);
  void enqueue(Lit l, ClauseRef reason);
  ClauseRef propagate();
  void analyze(ClauseRef confl, std::vector<Lit>& learnt, int& bt_level,
               uint32_t& lbd);
  void backtrack(int level);
  void new_decision_level() { trail_lim_.push_back(static_cast<int>(trail_.size())); }
  Lit pick_branch();
  void bump_var(int32_t v);
  void decay_activity();
  void reduce_learnts();
  void self_check_model() const;
  SolveResult finish(SolveStatus status);

  SolverConfig config_;
  SolverStats stats_;
  bool ok_ = true;  // false once an empty clause is derived at level 0

  std::deque<Clause> clauses_;
  std::vector<ClauseRef> learnt_refs_;
  std::vector<std::vector<Watcher>> watches_;

  std::vector<int8_t> assign_;   // 1..n: -1 false, 0 unset, +1 true
  std::vector<int8_t> phase_;    // saved polarity per variable
  std::vector<int> level_;
  std::vector<ClauseRef> reason_;
  std::vector<Lit> trail_;
  std::vector<int> trail_lim_;
  std::size_t qhead_ = 0;

  std::vector<double> activity_;
  double var_inc_ = 1.0;
  std::vector<int32_t> heap_;       // binary max-heap of decision candidates
  std::vector<int32_t> heap_pos_;   // var -> heap index, -1 when absent

  std::vector<uint8_t> seen_;       // scratch for analyze
  uint64_t max_learnts_ = 4000;
};

}  // namespace satx
