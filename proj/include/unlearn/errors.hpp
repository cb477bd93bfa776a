#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

/// Caller broke a documented precondition (dimensions, gamma, ledger rules).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or out-of-range user data (labels, CSV content, empty sets).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A small core matrix in a Woodbury-style update is singular or too
/// ill-conditioned to factorize safely.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (I - F T F^T) could not be factorized: the forget rows were not part of
/// the tracked Gram matrix, or the update cancels catastrophically.
class UnlearnabilityError : public SingularityError {
 public:
  using SingularityError::SingularityError;
};

/// Internal state no longer satisfies its invariants (e.g. a tracking matrix
/// that is not positive definite).
class StateIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted bytes failed validation: bad magic, truncation, checksum.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

}  // namespace unlearn
