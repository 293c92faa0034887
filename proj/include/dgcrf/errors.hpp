#pragma once

#include <stdexcept>
#include <string>

namespace dgcrf {

// Base of everything the library throws.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class IndexError : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

// NaN/Inf encountered in a computation or supplied to a container.
class NumericError : public Error {
  public:
    using Error::Error;
};

// Dense factorization broke down on a matrix that was supposed to be SPD.
class DefinitenessError : public Error {
  public:
    using Error::Error;
};

// Refusal to build an object whose size would be unreasonable for a naive path.
class SizeGuardError : public Error {
  public:
    using Error::Error;
};

// Training loss became non-finite.
class DivergenceError : public Error {
  public:
    using Error::Error;
};

// A brute-force reference computation could not produce a trustworthy value.
class OracleError : public Error {
  public:
    using Error::Error;
};

} // namespace dgcrf
