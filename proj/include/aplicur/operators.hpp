#ifndef APLICUR_OPERATORS_HPP
#define APLICUR_OPERATORS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"

namespace aplicur {

/// Counts of forward / transpose applications; shared so compositions can
/// report the applications of an inner operator.
struct MatvecCounter {
  std::uint64_t forward = 0;
  std::uint64_t transpose = 0;
  std::uint64_t total() const { return forward + transpose; }
};

/// Matrix-free linear map with an adjoint. Applications are counted.
class LinearOperator {
 public:
  using Apply = std::function<void(std::span<const double>, std::span<double>)>;

  LinearOperator(Index rows, Index cols, Apply fwd, Apply adj)
      : rows_(rows), cols_(cols), fwd_(std::move(fwd)), adj_(std::move(adj)),
        counter_(std::make_shared<MatvecCounter>()) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  void apply(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(x.size()) == cols_ && static_cast<Index>(y.size()) == rows_,
                    ErrorKind::dimension_mismatch, "LinearOperator::apply: shape mismatch");
    fwd_(x, y);
    ++counter_->forward;
  }

  void apply_transpose(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(x.size()) == rows_ && static_cast<Index>(y.size()) == cols_,
                    ErrorKind::dimension_mismatch, "LinearOperator::apply_transpose: shape mismatch");
    adj_(x, y);
    ++counter_->transpose;
  }

  const MatvecCounter& counts() const { return *counter_; }
  std::shared_ptr<MatvecCounter> counter() const { return counter_; }

 private:
  Index rows_, cols_;
  Apply fwd_, adj_;
  std::shared_ptr<MatvecCounter> counter_;
};

inline LinearOperator make_operator(const Matrix& a) {
  return LinearOperator(
      a.rows(), a.cols(),
      [&a](std::span<const double> x, std::span<double> y) { a.matvec(x, y); },
      [&a](std::span<const double> x, std::span<double> y) { a.matvec_transpose(x, y); });
}

inline LinearOperator make_operator(const AugmentedOperator& a) {
  return LinearOperator(
      a.rows(), a.cols(),
      [&a](std::span<const double> x, std::span<double> y) { a.matvec(x, y); },
      [&a](std::span<const double> x, std::span<double> y) { a.matvec_transpose(x, y); });
}

/// Right-preconditioned composition Op * P^{-1}: forward v -> Op(P^{-1} v),
/// adjoint u -> P^{-T}(Op^T u). The preconditioner is any object with
/// apply_inv / apply_inv_transpose on length-n vectors.
template <class Precond>
LinearOperator right_preconditioned(const LinearOperator& op, const Precond& p) {
  Index n = op.cols();
  return LinearOperator(
      op.rows(), n,
      [&op, &p, n](std::span<const double> x, std::span<double> y) {
        std::vector<double> z(static_cast<std::size_t>(n));
        p.apply_inv(x, z);
        op.apply(z, y);
      },
      [&op, &p, n](std::span<const double> x, std::span<double> y) {
        std::vector<double> z(static_cast<std::size_t>(n));
        op.apply_transpose(x, z);
        p.apply_inv_transpose(z, y);
      });
}

} // namespace aplicur

#endif
