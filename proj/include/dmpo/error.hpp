#pragma once

#include <stdexcept>
#include <string>

namespace dmpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent setup: dimension mismatches, unknown names, bad wiring.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Attempt to take a gradient of, or update, a frozen policy.
class UpdateRefusedError : public Error {
 public:
  using Error::Error;
};

/// An occupancy ratio was requested where the reference measure is zero.
class SupportMismatchError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling could not produce the requested data.
class GenerationExhaustedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmpo
