#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qnnv {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input (NNET, JSON, property DSL, LUT files, solver output).
/// `line` and `column` are 1-based; zero means "unknown".
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class DivisionByZero : public Error {
public:
  DivisionByZero() : Error("fixed-point division by zero") {}
};

class LutError : public Error {
public:
  using Error::Error;
};

/// The assumes of a property describe an empty input domain.
class VacuousProperty : public Error {
public:
  using Error::Error;
};

class EncodeError : public Error {
public:
  using Error::Error;
};

class DecodeError : public Error {
public:
  using Error::Error;
};

/// Brute-force enumeration refused because the grid exceeds the limit.
class GridTooLarge : public Error {
public:
  using Error::Error;
};

} // namespace qnnv
