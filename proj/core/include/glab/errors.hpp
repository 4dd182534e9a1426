#pragma once

#include <stdexcept>
#include <string>

namespace glab {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class TimeOutOfRange : public Error {
 public:
  using Error::Error;
};

class UnknownClass : public Error {
 public:
  using Error::Error;
};

/// Raised when a requested density cannot be normalized (improper or underflowing).
class NonNormalizable : public Error {
 public:
  using Error::Error;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

class DivergedTraining : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace glab
