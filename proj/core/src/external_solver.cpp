// SPDX-License-Identifier: Apache-2.0

#include "satx/external_solver.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "satx/errors.hpp"

namespace satx {

namespace {

std::filesystem::path temp_dimacs_path() {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path();
  return dir / ("satx_external_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++) + ".cnf");
}

struct FileRemover {
  std::filesystem::path path;
  ~FileRemover() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

std::string run_and_capture(const std::string& command) {
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) throw BackendError("cannot launch external solver: " + command);
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  ::pclose(pipe);  // exit status intentionally tolerated
  return output;
}

}  // namespace

SolveResult solve_external(const CnfFormula& formula, const std::string& command,
                           std::span<const Lit> assumptions) {
  auto path = temp_dimacs_path();
  FileRemover remover{path};
  {
    std::ofstream out(path);
    if (!out) throw BackendError("cannot write temp dimacs: " + path.string());
    out << "p cnf " << formula.num_vars << ' '
        << formula.clauses.size() + assumptions.size() << '\n';
    for (const auto& clause : formula.clauses) {
      for (Lit l : clause) out << l << ' ';
      out << "0\n";
    }
    for (Lit a : assumptions) out << a << " 0\n";
    if (!out.flush()) throw BackendError("write failed: " + path.string());
  }

  std::string output = run_and_capture(command + " " + path.string());

  bool sat = false, unsat = false;
  std::vector<Lit> values;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("s ", 0) == 0) {
      if (line.find("UNSATISFIABLE") != std::string::npos)
        unsat = true;
      else if (line.find("SATISFIABLE") != std::string::npos)
        sat = true;
    } else if (line.rfind("v", 0) == 0 && (line.size() == 1 || line[1] == ' ')) {
      std::istringstream vals(line.substr(1));
      Lit l;
      while (vals >> l)
        if (l != 0) values.push_back(l);
    }
  }
  if (unsat) return SolveResult{SolveStatus::Unsat, {}};
  if (!sat)
    throw BackendError("external solver produced no verdict line; output was:\n" +
                       output);

  Assignment model(formula.num_vars);
  for (int32_t v = 1; v <= formula.num_vars; ++v) model.set(v, false);
  for (Lit l : values) {
    if (lit_var(l) <= formula.num_vars) model.set(lit_var(l), l > 0);
  }
  CnfFormula with_assumptions = formula;
  for (Lit a : assumptions) with_assumptions.add_clause({a});
  if (!evaluate(with_assumptions, model))
    throw BackendError("external solver model failed verification");
  return SolveResult{SolveStatus::Sat, std::move(model)};
}

}  // namespace satx
