#include "hain/gradcheck.hpp"

#include <cmath>

#include "hain/common.hpp"

namespace hain {

Matrix2D central_difference(const ScalarFn& f, const Matrix2D& at, double h) {
  if (!(h > 0.0)) throw ContractError("central_difference: h must be positive");
  Matrix2D grad(at.rows(), at.cols());
  Matrix2D x = at;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x.data()[k];
    x.data()[k] = orig + h;
    const double fp = f(x);
    x.data()[k] = orig - h;
    const double fm = f(x);
    x.data()[k] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvaluationError("central_difference: f produced a non-finite value");
    grad.data()[k] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_rel_error(const Matrix2D& analytic, const Matrix2D& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols())
    throw_shape_error("max_rel_error", analytic, numeric);
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double a = analytic.data()[k];
    const double n = numeric.data()[k];
    const double err = std::fabs(a - n) / std::max(1.0, std::fabs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const ScalarFn& f, const Matrix2D& at, double h,
                         const Matrix2D& analytic_grad) {
  return max_rel_error(analytic_grad, central_difference(f, at, h));
}

}  // namespace hain
