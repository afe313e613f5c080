#pragma once

#include <stdexcept>
#include <string>

namespace softcoul {

// Base of everything this library throws. Subclasses group failures by how
// a caller is expected to react: bad input (DomainError) vs. a numerical
// procedure that did not deliver (NumericalFailure).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A family with a pole was evaluated at the pole.
class SingularEvaluation : public DomainError {
 public:
  using DomainError::DomainError;
};

// Argument on or across the principal-branch cut.
class BranchCutError : public DomainError {
 public:
  using DomainError::DomainError;
};

class OutOfSpanError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnboundedPotential : public DomainError {
 public:
  using DomainError::DomainError;
};

// Grid too coarse (or too small) for the requested physics.
class ResolutionError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Invalid experiment configuration (CLI / JSON layer).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string path = {})
      : Error(what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// Wave packet reached the box edge.
class BlowUpError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// A-priori Dyson remainder bound above the caller's ceiling.
class TruncationBudgetError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace softcoul
