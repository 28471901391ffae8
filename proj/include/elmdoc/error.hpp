#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elmdoc {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid value for a parameter (C <= 0, zero sizes, non-finite data, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed or the system matrix is not symmetric.
class SolverError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  SolverError(const std::string& what, std::size_t pivot = npos)
      : Error(what), pivot_(pivot) {}

  /// Index of the failing pivot, or npos for a symmetry failure.
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  enum class Kind { io, bad_magic, bad_version, truncated, shape, invalid };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline const char* to_string(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::io: return "io";
    case FormatError::Kind::bad_magic: return "bad magic";
    case FormatError::Kind::bad_version: return "bad version";
    case FormatError::Kind::truncated: return "truncated";
    case FormatError::Kind::shape: return "shape";
    case FormatError::Kind::invalid: return "invalid";
  }
  return "unknown";
}

}  // namespace elmdoc
