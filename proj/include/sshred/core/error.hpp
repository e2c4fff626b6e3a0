#pragma once

#include <stdexcept>
#include <string>

namespace sshred {

// Base of every error raised by the library. Subclasses let callers (and the
// CLI exit-code mapping) tell configuration problems from numerical ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Singular or rank-deficient least-squares systems.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Non-finite state during an ODE rollout or a non-finite training loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step, long substep = -1)
      : NumericalError(what), step_(step), substep_(substep) {}
  long step() const { return step_; }
  long substep() const { return substep_; }

 private:
  long step_;
  long substep_;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

// File format family.
class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DimensionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  ChecksumError(const std::string& what, std::string section)
      : FormatError(what), section_(std::move(section)) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

}  // namespace sshred
