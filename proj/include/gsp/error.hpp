#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsp {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A graph violates a data-model invariant (unreachable node, dangling edge, ...).
class IntegrityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed action sequence handed to rebuild().
class StructureError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input exceeds an enumeration guard.
class SizeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corpus/annotation/config problems surfaced to the CLI as exit code 2.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gsp
