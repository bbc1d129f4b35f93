// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace satx {

// Literals are signed DIMACS integers: +v / -v for variable v >= 1.
using Lit = int32_t;

inline int32_t lit_var(Lit l) { return l < 0 ? -l : l; }

// Clause database. Clauses keep insertion order; duplicate literals are
// removed at insertion and tautologies are rejected. The empty clause is
// representable and means the formula is unsatisfiable.
struct CnfFormula {
  int32_t num_vars = 0;
  std::vector<std::vector<Lit>> clauses;

  void ensure_vars(int32_t n) {
    if (n > num_vars) num_vars = n;
  }

  // Returns false when the clause is a tautology (not inserted). Throws
  // std::invalid_argument on a zero literal or a variable beyond num_vars.
  bool add_clause(std::vector<Lit> lits);

  bool operator==(const CnfFormula&) const = default;
};

// Total or partial truth assignment over variables 1..num_vars.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(int32_t num_vars) : values_(num_vars + 1, 0) {}

  int32_t num_vars() const { return static_cast<int32_t>(values_.size()) - 1; }
  void set(int32_t var, bool value) { values_.at(var) = value ? 1 : -1; }
  void unset(int32_t var) { values_.at(var) = 0; }
  bool has(int32_t var) const { return values_.at(var) != 0; }
  bool value(int32_t var) const { return values_.at(var) > 0; }

  bool is_total() const;
  // True literal under this assignment; the literal's variable must be set.
  bool satisfies(Lit l) const { return l > 0 ? value(l) : !value(-l); }

  bool operator==(const Assignment&) const = default;

 private:
  std::vector<int8_t> values_;  // index 0 unused; -1 false, 0 unset, +1 true
};

// True iff every clause has a true literal. Throws std::invalid_argument
// when the assignment is partial or sized differently from the formula.
bool evaluate(const CnfFormula& formula, const Assignment& assignment);

// DIMACS CNF interchange. write_dimacs emits the exact format
// "p cnf <num_vars> <num_clauses>\n" followed by one zero-terminated clause
// per line. read_dimacs skips comment lines and reports malformed input as
// SchemaError with a line number.
void write_dimacs(const CnfFormula& formula, std::ostream& out);
CnfFormula read_dimacs(std::istream& in);

void write_dimacs_file(const CnfFormula& formula, const std::string& path);
CnfFormula read_dimacs_file(const std::string& path);

}  // namespace satx
