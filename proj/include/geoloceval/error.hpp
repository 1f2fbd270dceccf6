#pragma once

#include <stdexcept>
#include <string>

namespace geoloceval {

/// Exit status reported by the CLI for each error family.
enum class ErrorKind {
  Config = 2,
  Validation = 3,
  Geocoding = 4,
  Io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::Validation, what) {}
};

/// Malformed document. `offset` is the byte position reported by the parser.
struct ParseError : ValidationError {
  ParseError(const std::string& what, std::size_t offset)
      : ValidationError(what), offset(offset) {}
  std::size_t offset;
};

struct GeocodeError : Error {
  explicit GeocodeError(const std::string& what)
      : Error(ErrorKind::Geocoding, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace geoloceval
