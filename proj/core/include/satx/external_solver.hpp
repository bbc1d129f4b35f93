// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "satx/cnf.hpp"
#include "satx/solver.hpp"

namespace satx {

// Runs `command <dimacs-file>` and parses the conventional solver output:
// an "s SATISFIABLE" / "s UNSATISFIABLE" verdict line and optional "v"
// value lines. Assumptions are appended to the formula as unit clauses.
// Sat models are verified against the formula before being accepted;
// variables missing from the value lines default to false. Exit codes are
// ignored as long as a verdict line is present (10/20 conventions vary).
//
// Throws BackendError when the process cannot run, produces no verdict, or
// returns a model that fails verification.
SolveResult solve_external(const CnfFormula& formula, const std::string& command,
                           std::span<const Lit> assumptions = {});

}  // namespace satx
