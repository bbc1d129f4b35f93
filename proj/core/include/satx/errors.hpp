// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace satx {

// Base class for recoverable toolchain errors. The CLI maps these to
// exit code 1 unless a more specific mapping applies.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent on-disk artifact (model file, DIMACS file,
// feature file, report). The message names the offending field.
struct SchemaError : Error {
  using Error::Error;
};

// Well-formed but meaningless query, e.g. asking "why not" the class that
// is already predicted. Mapped to a usage error (exit code 2) by the CLI.
struct InvalidQueryError : Error {
  using Error::Error;
};

// An oracle refused an instance that exceeds its hard guard. Oracles never
// silently truncate; they refuse.
struct GuardError : Error {
  using Error::Error;
};

// External solver process failed or produced output we cannot interpret.
struct BackendError : Error {
  using Error::Error;
};

// Training diverged or received unusable hyperparameters.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace satx
