#pragma once

#include <stdexcept>
#include <string>

namespace nlgnn {

// Error taxonomy used across the engine. Everything derives from Error so
// callers (CLI, bindings) can catch one type and map it to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with an operation.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration value (kernel size, dropout rate, window, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent input files.
struct IngestError : Error {
  using Error::Error;
};

// Failure during a training run (divergence, non-finite gradients).
struct TrainError : Error {
  using Error::Error;
};

// An API contract was violated (non-scalar loss, NaN score, bad permutation).
struct ContractError : Error {
  using Error::Error;
};

// Infeasible generation or undefined metric request.
struct ValueError : Error {
  using Error::Error;
};

}  // namespace nlgnn
