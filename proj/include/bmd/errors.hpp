#pragma once

#include <stdexcept>
#include <string>

namespace bmd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class EmptyMaskError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class UnderflowError : public Error {
public:
  using Error::Error;
};

class LinearSolveError : public Error {
public:
  using Error::Error;
};

/// Posterior with no information or non-positive variance.
class DegenerateError : public Error {
public:
  using Error::Error;
};

class InputError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class RankError : public Error {
public:
  using Error::Error;
};

class InfeasibleError : public Error {
public:
  using Error::Error;
};

} // namespace bmd
