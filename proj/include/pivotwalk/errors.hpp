#pragma once

#include <stdexcept>
#include <string>

namespace pivotwalk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied values (identical generators, trivial words, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Degenerate arithmetic or exhausted working precision.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

// Operation defined only for a class of isometries it was not given.
class ClassificationError : public Error {
 public:
  using Error::Error;
};

// A documented precondition on constants or inputs does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A checked invariant failed at run time.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double dropped)
      : Error(what), dropped_(dropped) {}
  double dropped_mass() const noexcept { return dropped_; }

 private:
  double dropped_;
};

// Requested decomposition weight exceeds what the measure allows.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double alpha_max)
      : Error(what), alpha_max_(alpha_max) {}
  double alpha_max() const noexcept { return alpha_max_; }

 private:
  double alpha_max_;
};

// Search or construction gave up within its limits.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace pivotwalk
