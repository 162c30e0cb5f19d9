#pragma once

#include <stdexcept>
#include <string>

namespace imasp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Gram matrix of the observed locations cannot be factorized.
class SingularGram : public Error {
 public:
  using Error::Error;
};

/// Covariance matrix with non-positive determinant.
class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class IllegalAction : public Error {
 public:
  using Error::Error;
};

/// An outcome interval carries (numerically) no probability mass.
class VanishingInterval : public Error {
 public:
  using Error::Error;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

/// A policy was asked to act in a state without legal actions.
class DeadEnd : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class MissingCell : public Error {
 public:
  using Error::Error;
};

class NonPositiveValue : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace imasp
