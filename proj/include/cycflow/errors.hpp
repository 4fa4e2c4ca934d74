#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cycflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad sizes, non-permutations, out-of-domain arguments, invalid configs.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// An oracle was asked for an instance larger than it supports.
class SizeLimitError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Input geometry admits no well-defined answer (coincident points, zero-length tour).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Missing files, unlabeled datasets, inconsistent records.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cycflow
