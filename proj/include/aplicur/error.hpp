#ifndef APLICUR_ERROR_HPP
#define APLICUR_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aplicur {

enum class ErrorKind {
  invalid_argument,   // bad parameter, out-of-range or duplicate index
  dimension_mismatch, // incompatible shapes
  rank_deficient,     // factorization detected a (numerically) deficient column
  singular,           // zero pivot / singular triangular or intersection block
  not_positive,       // Cholesky hit a non-positive pivot
  no_convergence,     // iteration cap hit inside a factorization
  numerical_breakdown,// NaN/Inf in solver recurrences
  not_applicable,     // a bound's precondition is violated
  io,                 // file format / filesystem problems
};

/// Error with a machine-readable kind and an optional index payload
/// (e.g. the deficient column of a QR factorization).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::int64_t index = -1)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::int64_t index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::int64_t index_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what,
                              std::int64_t index = -1) {
  throw Error(kind, what, index);
}

inline void require(bool cond, ErrorKind kind, const std::string& what,
                    std::int64_t index = -1) {
  if (!cond) fail(kind, what, index);
}

} // namespace detail

} // namespace aplicur

#endif
