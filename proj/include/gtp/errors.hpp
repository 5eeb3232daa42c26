#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gtp {

// Root of every error the library throws. Callers that only care about
// "validation vs runtime" can branch on is_validation().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_validation() const { return true; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  explicit ZeroNormError(const std::string& what, std::size_t index = 0)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class NondeterminismError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return false; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return false; }
};

}  // namespace gtp
