// SPDX-License-Identifier: Apache-2.0

#include "satx/solver.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

#include "satx/errors.hpp"

namespace satx {

namespace {

// Luby sequence (0-based): 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ...
uint64_t luby(uint64_t x) {
  uint64_t size = 1;
  int seq = 0;
  while (size < x + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != x) {
    size = (size - 1) / 2;
    --seq;
    x %= size;
  }
  return uint64_t(1) << seq;
}

// splitmix64; used only to derive tiny seed-dependent activity offsets.
uint64_t mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Solver::Solver(SolverConfig config) : config_(config) {
  if (config_.vsids_decay <= 0.0 || config_.vsids_decay >= 1.0)
    throw std::invalid_argument("vsids_decay must be in (0,1)");
  if (config_.restart_base < 1)
    throw std::invalid_argument("restart_base must be >= 1");
  assign_.resize(1, 0);
  phase_.resize(1, 0);
  level_.resize(1, 0);
  reason_.resize(1, kNoClause);
  activity_.resize(1, 0.0);
  heap_pos_.resize(1, -1);
  seen_.resize(1, 0);
  watches_.resize(2);
}

// --------------------------------------------------------------------------
// Decision heap: binary max-heap on activity, ties to the lower variable
// index so runs are reproducible.

namespace {
struct HeapOps {
  std::vector<int32_t>& heap;
  std::vector<int32_t>& pos;
  const std::vector<double>& act;

  bool before(int32_t a, int32_t b) const {
    return act[a] > act[b] || (act[a] == act[b] && a < b);
  }
  void sift_up(std::size_t i) {
    int32_t v = heap[i];
    while (i > 0) {
      std::size_t parent = (i - 1) / 2;
      if (!before(v, heap[parent])) break;
      heap[i] = heap[parent];
      pos[heap[i]] = static_cast<int32_t>(i);
      i = parent;
    }
    heap[i] = v;
    pos[v] = static_cast<int32_t>(i);
  }
  void sift_down(std::size_t i) {
    int32_t v = heap[i];
    for (;;) {
      std::size_t child = 2 * i + 1;
      if (child >= heap.size()) break;
      if (child + 1 < heap.size() && before(heap[child + 1], heap[child])) ++child;
      if (!before(heap[child], v)) break;
      heap[i] = heap[child];
      pos[heap[i]] = static_cast<int32_t>(i);
      i = child;
    }
    heap[i] = v;
    pos[v] = static_cast<int32_t>(i);
  }
  void insert(int32_t v) {
    if (pos[v] >= 0) return;
    heap.push_back(v);
    pos[v] = static_cast<int32_t>(heap.size()) - 1;
    sift_up(heap.size() - 1);
  }
  int32_t pop() {
    int32_t top = heap[0];
    pos[top] = -1;
    heap[0] = heap.back();
    heap.pop_back();
    if (!heap.empty()) {
      pos[heap[0]] = 0;
      sift_down(0);
    }
    return top;
  }
};
}  // namespace

void Solver::ensure_vars(int32_t n) {
  while (num_vars() < n) {
    int32_t v = num_vars() + 1;
    assign_.push_back(0);
    phase_.push_back(0);
    level_.push_back(0);
    reason_.push_back(kNoClause);
    double offset = 0.0;
    if (config_.seed != 0)
      offset = 1e-12 * static_cast<double>(mix(config_.seed ^ uint64_t(v)) >> 40);
    activity_.push_back(offset);
    heap_pos_.push_back(-1);
    seen_.push_back(0);
    watches_.emplace_back();
    watches_.emplace_back();
    HeapOps{heap_, heap_pos_, activity_}.insert(v);
  }
}

void Solver::attach(ClauseRef cref) {
  const Clause& c = clauses_[cref];
  assert(c.lits.size() >= 2);
  watches_[watch_index(-c.lits[0])].push_back({cref, c.lits[1]});
  watches_[watch_index(-c.lits[1])].push_back({cref, c.lits[0]});
}

bool Solver::add_clause(std::span<const Lit> lits) {
  assert(decision_level() == 0);
  std::vector<Lit> cleaned;
  cleaned.reserve(lits.size());
  for (Lit l : lits) {
    if (l == 0 || lit_var(l) > num_vars())
      throw std::invalid_argument("add_clause: literal out of bounds: " +
                                  std::to_string(l));
    if (value(l) == 1) return true;   // satisfied at level 0
    if (value(l) == -1) continue;     // false at level 0, drop literal
    bool dup = false;
    for (Lit seen : cleaned) {
      if (seen == l) {
        dup = true;
        break;
      }
      if (seen == -l) return false;  // tautology, rejected
    }
    if (!dup) cleaned.push_back(l);
  }
  if (!ok_) return true;
  if (cleaned.empty()) {
    ok_ = false;
    return true;
  }
  if (cleaned.size() == 1) {
    enqueue(cleaned[0], kNoClause);
    if (propagate() != kNoClause) ok_ = false;
    return true;
  }
  clauses_.push_back(Clause{std::move(cleaned), 0, false, false});
  attach(static_cast<ClauseRef>(clauses_.size() - 1));
  return true;
}

void Solver::add_formula(const CnfFormula& formula) {
  ensure_vars(formula.num_vars);
  for (const auto& clause : formula.clauses) add_clause(clause);
}

void Solver::enqueue(Lit l, ClauseRef reason) {
  int32_t v = lit_var(l);
  assert(assign_[v] == 0);
  assign_[v] = l > 0 ? 1 : -1;
  level_[v] = decision_level();
  reason_[v] = reason;
  trail_.push_back(l);
  if (reason != kNoClause) ++stats_.propagations;
}

Solver::ClauseRef Solver::propagate() {
  while (qhead_ < trail_.size()) {
    Lit p = trail_[qhead_++];
    auto& ws = watches_[watch_index(p)];  // clauses whose watch ~p just went false
    std::size_t i = 0, j = 0;
    while (i < ws.size()) {
      Watcher w = ws[i];
      if (clauses_[w.cref].removed) {
        ++i;  // dropped lazily
        continue;
      }
      if (value(w.blocker) == 1) {
        ws[j++] = w;
        ++i;
        continue;
      }
      Clause& c = clauses_[w.cref];
      Lit false_lit = -p;
      if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
      assert(c.lits[1] == false_lit);
      ++i;
      Lit first = c.lits[0];
      if (value(first) == 1) {
        ws[j++] = {w.cref, first};
        continue;
      }
      bool moved = false;
      for (std::size_t k = 2; k < c.lits.size(); ++k) {
        if (value(c.lits[k]) != -1) {
          std::swap(c.lits[1], c.lits[k]);
          watches_[watch_index(-c.lits[1])].push_back({w.cref, first});
          moved = true;
          break;
        }
      }
      if (moved) continue;
      // Unit or conflicting.
      ws[j++] = {w.cref, first};
      if (value(first) == -1) {
        // Conflict: keep the remaining watchers, stop propagating.
        while (i < ws.size()) ws[j++] = ws[i++];
        ws.resize(j);
        qhead_ = trail_.size();
        return w.cref;
      }
      enqueue(first, w.cref);
    }
    ws.resize(j);
  }
  return kNoClause;
}

void Solver::bump_var(int32_t v) {
  activity_[v] += var_inc_;
  if (activity_[v] > 1e100) {
    for (auto& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_pos_[v] >= 0)
    HeapOps{heap_, heap_pos_, activity_}.sift_up(heap_pos_[v]);
}

void Solver::decay_activity() { var_inc_ /= config_.vsids_decay; }

void Solver::analyze(ClauseRef confl, std::vector<Lit>& learnt, int& bt_level,
                     uint32_t& lbd) {
  learnt.clear();
  learnt.push_back(0);  // slot for the asserting literal
  int path = 0;
  Lit p = 0;
  std::size_t index = trail_.size();
  ClauseRef cr = confl;
  do {
    assert(cr != kNoClause);
    const Clause& c = clauses_[cr];
    for (std::size_t k = (p == 0 ? 0 : 1); k < c.lits.size(); ++k) {
      Lit q = c.lits[k];
      int32_t v = lit_var(q);
      if (!seen_[v] && level_[v] > 0) {
        seen_[v] = 1;
        bump_var(v);
        if (level_[v] >= decision_level())
          ++path;
        else
          learnt.push_back(q);
      }
    }
    while (!seen_[lit_var(trail_[--index])]) {
    }
    p = trail_[index];
    cr = reason_[lit_var(p)];
    seen_[lit_var(p)] = 0;
    --path;
  } while (path > 0);
  learnt[0] = -p;

  if (learnt.size() == 1) {
    bt_level = 0;
  } else {
    std::size_t max_i = 1;
    for (std::size_t i = 2; i < learnt.size(); ++i)
      if (level_[lit_var(learnt[i])] > level_[lit_var(learnt[max_i])]) max_i = i;
    std::swap(learnt[1], learnt[max_i]);
    bt_level = level_[lit_var(learnt[1])];
  }

  std::vector<int> levels;
  levels.reserve(learnt.size());
  for (Lit q : learnt) levels.push_back(level_[lit_var(q)]);
  std::sort(levels.begin(), levels.end());
  lbd = static_cast<uint32_t>(
      std::unique(levels.begin(), levels.end()) - levels.begin());

  for (Lit q : learnt) seen_[lit_var(q)] = 0;
}

void Solver::backtrack(int target) {
  if (decision_level() <= target) return;
  HeapOps heap_ops{heap_, heap_pos_, activity_};
  for (std::size_t k = trail_.size(); k > static_cast<std::size_t>(trail_lim_[target]);
       --k) {
    Lit l = trail_[k - 1];
    int32_t v = lit_var(l);
    phase_[v] = assign_[v] > 0 ? 1 : 0;  // phase saving
    assign_[v] = 0;
    reason_[v] = kNoClause;
    heap_ops.insert(v);
  }
  trail_.resize(trail_lim_[target]);
  trail_lim_.resize(target);
  qhead_ = trail_.size();
}

Lit Solver::pick_branch() {
  HeapOps heap_ops{heap_, heap_pos_, activity_};
  while (!heap_.empty()) {
    int32_t v = heap_ops.pop();
    if (assign_[v] == 0) return phase_[v] ? v : -v;
  }
  return 0;
}

void Solver::reduce_learnts() {
  std::vector<ClauseRef> candidates;
  for (ClauseRef cref : learnt_refs_) {
    const Clause& c = clauses_[cref];
    if (c.removed || c.lbd <= static_cast<uint32_t>(config_.keep_lbd)) continue;
    Lit asserted = c.lits[0];
    bool locked = value(asserted) == 1 && reason_[lit_var(asserted)] == cref;
    if (!locked) candidates.push_back(cref);
  }
  std::sort(candidates.begin(), candidates.end(), [&](ClauseRef a, ClauseRef b) {
    const Clause& ca = clauses_[a];
    const Clause& cb = clauses_[b];
    if (ca.lbd != cb.lbd) return ca.lbd > cb.lbd;
    if (ca.lits.size() != cb.lits.size()) return ca.lits.size() > cb.lits.size();
    return a > b;
  });
  std::size_t to_remove = candidates.size() / 2;
  for (std::size_t i = 0; i < to_remove; ++i) {
    clauses_[candidates[i]].removed = true;
    ++stats_.deleted;
  }
  for (auto& ws : watches_) {
    std::erase_if(ws, [&](const Watcher& w) { return clauses_[w.cref].removed; });
  }
  std::erase_if(learnt_refs_,
                [&](ClauseRef cref) { return clauses_[cref].removed; });
  max_learnts_ += 1000;
}

void Solver::self_check_model() const {
  for (const Clause& c : clauses_) {
    if (c.removed) continue;
    bool sat = false;
    for (Lit l : c.lits) {
      if (value(l) == 1) {
        sat = true;
        break;
      }
    }
    if (!sat) throw Error("solver produced a model violating a clause");
  }
}

SolveResult Solver::finish(SolveStatus status) {
  SolveResult result;
  result.status = status;
  if (status == SolveStatus::Sat) {
    self_check_model();
    result.model = Assignment(num_vars());
    for (int32_t v = 1; v <= num_vars(); ++v) result.model.set(v, assign_[v] > 0);
  }
  backtrack(0);
  return result;
}

SolveResult Solver::solve(std::span<const Lit> assumptions) {
  ++stats_.solves;
  for (Lit a : assumptions)
    if (a == 0 || lit_var(a) > num_vars())
      throw std::invalid_argument("assumption literal out of bounds");
  if (!ok_) return finish(SolveStatus::Unsat);

  const uint64_t start_conflicts = stats_.conflicts;
  uint64_t restart_index = 0;
  uint64_t restart_limit =
      luby(restart_index) * static_cast<uint64_t>(config_.restart_base);
  uint64_t since_restart = 0;

  std::vector<Lit> learnt;
  for (;;) {
    ClauseRef confl = propagate();
    if (confl != kNoClause) {
      ++stats_.conflicts;
      ++since_restart;
      if (decision_level() == 0) {
        ok_ = false;
        return finish(SolveStatus::Unsat);
      }
      int bt_level = 0;
      uint32_t lbd = 0;
      analyze(confl, learnt, bt_level, lbd);
      backtrack(bt_level);
      if (learnt.size() == 1) {
        enqueue(learnt[0], kNoClause);
      } else {
        clauses_.push_back(Clause{learnt, lbd, true, false});
        ClauseRef cref = static_cast<ClauseRef>(clauses_.size() - 1);
        learnt_refs_.push_back(cref);
        ++stats_.learned;
        attach(cref);
        enqueue(learnt[0], cref);
      }
      decay_activity();
      if (config_.conflict_budget &&
          stats_.conflicts - start_conflicts >= *config_.conflict_budget)
        return finish(SolveStatus::BudgetExhausted);
      if (learnt_refs_.size() > max_learnts_) reduce_learnts();
      if (since_restart >= restart_limit) {
        ++stats_.restarts;
        ++restart_index;
        restart_limit =
            luby(restart_index) * static_cast<uint64_t>(config_.restart_base);
        since_restart = 0;
        backtrack(0);
      }
      continue;
    }
    if (decision_level() < static_cast<int>(assumptions.size())) {
      Lit a = assumptions[decision_level()];
      if (value(a) == 1) {
        new_decision_level();  // placeholder level keeps indices aligned
        continue;
      }
      if (value(a) == -1) return finish(SolveStatus::Unsat);
      new_decision_level();
      ++stats_.decisions;
      enqueue(a, kNoClause);
      continue;
    }
    Lit next = pick_branch();
    if (next == 0) return finish(SolveStatus::Sat);
    new_decision_level();
    ++stats_.decisions;
    enqueue(next, kNoClause);
  }
}

}  // namespace satx
