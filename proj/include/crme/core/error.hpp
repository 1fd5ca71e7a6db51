#pragma once

#include <stdexcept>
#include <string>

namespace crme {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation received a map carrying the wrong domain tag.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Config, manifest or checkpoint failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace crme
