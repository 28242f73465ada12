#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace skillmind {

/// Base error. `kind` is a stable machine-readable tag used for exit-code
/// mapping and the --json diagnostic stream.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct IoError : Error {
  explicit IoError(const std::string& message) : Error("io", message) {}
};

struct ParseError : Error {
  std::size_t line = 0;  // 1-based; 0 when not line-addressable
  ParseError(std::size_t line_, const std::string& cause)
      : Error("parse", "line " + std::to_string(line_) + ": " + cause), line(line_) {}
  explicit ParseError(const std::string& cause) : Error("parse", cause) {}
};

}  // namespace skillmind
