#pragma once

#include <stdexcept>
#include <string>

namespace conelab {

// Evaluation outside the domain of a density or function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Adaptive quadrature failed: subdivision budget exhausted or a non-finite
// integrand sample was produced.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A weighted integral that should be finite diverges at 0 or at infinity.
class IntegrabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The test function vanishes where the quotient needs a positive denominator.
class DegenerateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A theorem hypothesis (MCP) failed, so no verdict is issued.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two diagnostics that must agree did not.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace conelab
