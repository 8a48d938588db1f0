#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mocha {

// Bad run configuration (schema violations, unknown keys, invalid values).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent data (malformed files, integrity violations).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Canonicalization cache miss in a context that forbids remote calls.
class CacheMissError : public DataError {
 public:
  explicit CacheMissError(const std::string& text)
      : DataError("canonical cache miss: \"" + text + "\""), text_(text) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

// Remote canonicalization endpoint failure (transport or protocol).
class EndpointError : public std::runtime_error {
 public:
  EndpointError(const std::string& msg, std::vector<size_t> failed = {})
      : std::runtime_error(msg), failed_indices_(std::move(failed)) {}
  const std::vector<size_t>& failed_indices() const { return failed_indices_; }

 private:
  std::vector<size_t> failed_indices_;
};

// Encoder produced a zero vector before normalization.
class DegenerateEncodingError : public DataError {
 public:
  explicit DegenerateEncodingError(const std::string& msg) : DataError(msg) {}
};

}  // namespace mocha
