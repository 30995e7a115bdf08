#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace logn {

// Root of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between records, statistics and parameters.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A record carried NaN or infinity.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t record_index, const std::string& what)
      : Error(what), record_index_(record_index) {}
  std::size_t record_index() const { return record_index_; }

 private:
  std::size_t record_index_;
};

// Argument outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation invoked on an object in the wrong state (e.g. uninitialized stats).
class StateError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace logn
