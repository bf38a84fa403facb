#pragma once

#include <stdexcept>
#include <string>

namespace bglm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A class id, token id or name lookup is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or configuration file content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or insufficient corpus data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint cannot be loaded into the requested model.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameters during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bglm
