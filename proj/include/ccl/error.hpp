#pragma once

#include <stdexcept>
#include <string>

namespace ccl {

/// Base for every failure raised by the library. The CLI maps the subclasses
/// onto exit statuses (config 2, hypothesis 3, invariant 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A point left the open cone an operator is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity broke an invariant that must hold mathematically.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// The input does not meet the hypotheses of a construction (e.g. no finite N).
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace ccl
