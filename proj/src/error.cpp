#include "qnnv/error.hpp"

namespace qnnv {

namespace {

std::string with_location(const std::string& what, std::size_t line, std::size_t column) {
  if (line == 0) {
    return what;
  }
  std::string loc = "line " + std::to_string(line);
  if (column != 0) {
    loc += ", column " + std::to_string(column);
  }
  return loc + ": " + what;
}

} // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(with_location(what, line, column)), line_(line), column_(column) {}

} // namespace qnnv
