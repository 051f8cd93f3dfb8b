#pragma once

#include <stdexcept>
#include <string>

namespace dnnr {

/// Broad failure class. Maps one-to-one onto the CLI exit codes.
enum class ErrorKind {
  usage = 1,
  data = 2,
  numeric = 3,
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

/// Bad flag, unknown field name, inconsistent configuration.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Anything wrong with input data: parse failures, missing ids, I/O.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Bad magic, version or checksum in one of the binary file formats.
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& what) : DataError(what) {}
};

/// Record-level parse failure. `line` is 1-based, 0 when unknown.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A user that cannot be processed (no resolvable history, no impressions).
/// Pipelines record these and move on.
class SkipUser : public DataError {
 public:
  explicit SkipUser(const std::string& why) : DataError(why) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace dnnr
