#ifndef HAIN_GRADCHECK_HPP
#define HAIN_GRADCHECK_HPP

#include <functional>

#include "hain/matrix.hpp"

namespace hain {

/// Scalar-valued function of a matrix, evaluated at perturbed points by the
/// finite-difference checker.
using ScalarFn = std::function<double(const Matrix2D&)>;

/// Max over entries of |analytic - central difference| / max(1, |analytic|).
/// `f` is re-evaluated 2·size(at) times; a non-finite value of f raises
/// EvaluationError. h must be positive.
double finite_diff_check(const ScalarFn& f, const Matrix2D& at, double h,
                         const Matrix2D& analytic_grad);

/// Central-difference gradient of f at `at` (the oracle half of the check).
Matrix2D central_difference(const ScalarFn& f, const Matrix2D& at, double h);

/// Same relative-error reduction applied to two explicit gradients.
double max_rel_error(const Matrix2D& analytic, const Matrix2D& numeric);

}  // namespace hain

#endif  // HAIN_GRADCHECK_HPP
