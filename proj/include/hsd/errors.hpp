#ifndef HSD_ERRORS_HPP
#define HSD_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsd {

/// Bad input data: malformed records, unknown labels, inconsistent corpora.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record that could not be parsed. Carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a domain rule (duplicate id, bad label set).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

/// Corrupt, truncated, or incompatible model / vocabulary file.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Tensor shapes that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration or command-line arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsd

#endif  // HSD_ERRORS_HPP
