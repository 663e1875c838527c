#pragma once

#include <stdexcept>
#include <string>

namespace emi {

/// Matrix pair is numerically rank deficient (null spaces of J and L intersect).
class NumericalRankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A retained TGSVD component has a zero generalized singular value.
class SingularComponentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Hankel-transform integrand cannot be integrated (non-decaying kernel, no convergence).
class QuadratureError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input file could not be parsed. `line()` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace emi
