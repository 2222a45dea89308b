#pragma once

#include <stdexcept>
#include <string>

namespace wtpfl {

// Every failure the library raises derives from Error so callers can sort
// validation problems (exit 1) from runtime problems (exit 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by the CSV loader; the message names the file and line.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InsufficientHistoryError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf during local SGD.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, int batch)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

/// Wraps any failure inside a federated round with the round index.
class RoundError : public Error {
 public:
  RoundError(const std::string& what, int round)
      : Error("round " + std::to_string(round) + ": " + what), round_(round) {}
  int round() const noexcept { return round_; }

 private:
  int round_;
};

}  // namespace wtpfl
