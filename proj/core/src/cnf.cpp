// SPDX-License-Identifier: Apache-2.0

#include "satx/cnf.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "satx/errors.hpp"

namespace satx {

bool CnfFormula::add_clause(std::vector<Lit> lits) {
  std::vector<Lit> cleaned;
  cleaned.reserve(lits.size());
  for (Lit l : lits) {
    if (l == 0) throw std::invalid_argument("literal 0 is not allowed");
    if (lit_var(l) > num_vars)
      throw std::invalid_argument("literal " + std::to_string(l) +
                                  " references an unallocated variable");
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
  clauses.push_back(std::move(cleaned));
  return true;
}

bool Assignment::is_total() const {
  for (std::size_t v = 1; v < values_.size(); ++v)
    if (values_[v] == 0) return false;
  return true;
}

bool evaluate(const CnfFormula& formula, const Assignment& assignment) {
  if (assignment.num_vars() < formula.num_vars)
    throw std::invalid_argument("assignment covers fewer variables than the formula");
  for (int32_t v = 1; v <= formula.num_vars; ++v)
    if (!assignment.has(v))
      throw std::invalid_argument("evaluate requires a total assignment");
  for (const auto& clause : formula.clauses) {
    bool sat = false;
    for (Lit l : clause) {
      if (assignment.satisfies(l)) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

void write_dimacs(const CnfFormula& formula, std::ostream& out) {
  out << "p cnf " << formula.num_vars << ' ' << formula.clauses.size() << '\n';
  for (const auto& clause : formula.clauses) {
    for (Lit l : clause) out << l << ' ';
    out << "0\n";
  }
}

CnfFormula read_dimacs(std::istream& in) {
  CnfFormula formula;
  bool have_header = false;
  long declared_clauses = 0;
  std::string line;
  int line_no = 0;
  std::vector<Lit> current;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == 'c') continue;
    std::istringstream ls(line);
    if (!have_header) {
      std::string p, cnf;
      if (!(ls >> p >> cnf >> formula.num_vars >> declared_clauses) || p != "p" ||
          cnf != "cnf" || formula.num_vars < 0 || declared_clauses < 0)
        throw SchemaError("dimacs line " + std::to_string(line_no) +
                          ": expected header 'p cnf <vars> <clauses>'");
      have_header = true;
      continue;
    }
    Lit l;
    while (ls >> l) {
      if (l == 0) {
        formula.clauses.push_back(current);
        current.clear();
        continue;
      }
      if (lit_var(l) > formula.num_vars)
        throw SchemaError("dimacs line " + std::to_string(line_no) + ": literal " +
                          std::to_string(l) + " exceeds declared variable count");
      current.push_back(l);
    }
    if (!ls.eof()) {
      std::string tail;
      ls.clear();
      ls >> tail;
      throw SchemaError("dimacs line " + std::to_string(line_no) +
                        ": unexpected token '" + tail + "'");
    }
  }
  if (!have_header) throw SchemaError("dimacs: missing 'p cnf' header");
  if (!current.empty())
    throw SchemaError("dimacs: last clause is not zero-terminated");
  if (declared_clauses != static_cast<long>(formula.clauses.size()))
    throw SchemaError("dimacs: header declares " + std::to_string(declared_clauses) +
                      " clauses but " + std::to_string(formula.clauses.size()) +
                      " were read");
  return formula;
}

void write_dimacs_file(const CnfFormula& formula, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  write_dimacs(formula, out);
  if (!out.flush()) throw Error("write failed: " + path);
}

CnfFormula read_dimacs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  return read_dimacs(in);
}

}  // namespace satx
