#pragma once

#include <stdexcept>
#include <string>

namespace dax {

// Root of every error the library throws. Callers that only need to report
// failures can catch this; the subclasses exist so tests and the CLI can tell
// configuration problems apart from runtime ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid shapes, hyperparameters or layer chains.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An object was used out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// A black-box query was rejected or returned something that is not a
// probability vector.
class QueryError : public Error {
 public:
  using Error::Error;
};

// Non-finite values met during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training finished but did not reach the requested quality floor.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Inputs for which the requested quantity is undefined (all-zero score sums,
// two empty masks in IoU, singular regression systems).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dax
