#pragma once

#include <stdexcept>
#include <string>

namespace dynprice {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A scenario is too large for exact tree or grid methods.
class CapacityError : public Error {
  public:
    using Error::Error;
};

/// An argument lies outside the domain of the operation (negative demand,
/// zero total demand in a ratio, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Malformed or missing scenario configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// An iterative solver hit its iteration limit.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

}  // namespace dynprice
