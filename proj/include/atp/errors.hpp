#pragma once

#include <stdexcept>
#include <string>

namespace atp {

// Base for every domain failure; the CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (wrong sizes, out-of-range arguments).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// J J^T is singular and no damping was requested.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class InfeasibleGoalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

void require(bool cond, const std::string& what);
void require_dims(bool cond, const std::string& what);

}  // namespace atp
