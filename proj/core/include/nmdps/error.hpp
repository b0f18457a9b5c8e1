#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmdps {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A well-formed event that violates a tree invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& event_id, const std::string& what)
      : Error("event '" + event_id + "': " + what), event_id_(event_id) {}
  const std::string& event_id() const noexcept { return event_id_; }

 private:
  std::string event_id_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nmdps
