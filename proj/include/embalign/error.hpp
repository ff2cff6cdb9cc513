#pragma once

#include <stdexcept>
#include <string>

namespace embalign {

enum class ErrorKind {
  Shape,      // dimension mismatch between operands
  Domain,     // argument outside the operation's domain
  Numeric,    // NaN, divergence, non-finite entries
  Format,     // malformed file (magic, version, truncation, digest)
  Data,       // well-formed file with unusable contents
  Integrity,  // model/bank identity mismatch
  Usage,      // CLI usage or configuration error
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_shape(const std::string& msg) { throw Error(ErrorKind::Shape, msg); }
[[noreturn]] inline void throw_domain(const std::string& msg) { throw Error(ErrorKind::Domain, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Format: return "format";
    case ErrorKind::Data: return "data";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

}  // namespace embalign
