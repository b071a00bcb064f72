#pragma once

#include <stdexcept>
#include <string>

namespace mtrack {

/// Precondition violated by caller-supplied arguments.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside a trajectory's time domain.
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Field or kernel evaluated at its singular point.
class SingularPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Iterative solver failed to converge or diverged.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Indicator is 0/0 for the requested column or point.
class UndefinedIndicator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sequential or parallel search ball contains no usable lattice point.
class EmptySearchBall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File I/O or parse failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtrack
