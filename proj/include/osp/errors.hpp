#pragma once

#include <stdexcept>
#include <string>

namespace osp {

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Vehicle heading (and therefore its reference frame) is undefined.
class FrameUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad or insufficient input data: malformed files, schema problems,
/// tracks too short, horizon coverage gaps.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingInfeasible : public DataError {
 public:
  explicit TrainingInfeasible(const std::string& what)
      : DataError("training-infeasible: " + what) {}
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace osp
