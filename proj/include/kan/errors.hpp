// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared by every module. The CLI maps them onto exit codes.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something malformed (shapes, indices, names, flags).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A value fell outside the domain of a function in strict evaluation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

/// Non-finite activation or loss; `layer` is the offending layer, or -1.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, int layer)
      : Error(what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// A black-box test could not reach a decision (all probes skipped).
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kan
