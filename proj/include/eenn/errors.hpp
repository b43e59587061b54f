#pragma once

#include <stdexcept>
#include <string>

namespace eenn {

// Dimension or shape violations: layer contracts, graph wiring, vector sizes.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// File-level problems: bad magic, malformed header, truncation.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Well-formed file with an unsupported format version.
class VersionError : public FormatError {
 public:
  explicit VersionError(const std::string& what) : FormatError(what) {}
};

// Invalid configuration values (stream, policy or benchmark configs).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace eenn
