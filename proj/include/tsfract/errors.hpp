#pragma once

#include <stdexcept>
#include <string>

namespace tsfract {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};
struct InvalidWindowSize : Error {
  using Error::Error;
};
struct UnderdeterminedFit : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct DegenerateVariance : Error {
  using Error::Error;
};
struct InsufficientScales : Error {
  using Error::Error;
};
struct SeriesTooShort : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct TrainingDiverged : Error {
  TrainingDiverged(int epoch_, const std::string& what_)
      : Error(what_), epoch(epoch_) {}
  int epoch;
};

}  // namespace tsfract
