#pragma once

#include <stdexcept>
#include <string>

namespace v2tex {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, violated preconditions, inconsistent shapes or configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable/unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad magic, truncation, CRC mismatch, bad CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace v2tex
