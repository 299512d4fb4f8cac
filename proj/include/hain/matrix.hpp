#ifndef HAIN_MATRIX_HPP
#define HAIN_MATRIX_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace hain {

/// Process-wide accounting of live Matrix2D elements. Lets tests assert
/// that chunked execution modes actually bound their working memory.
struct AllocStats {
  static std::int64_t live_doubles();
  static std::int64_t peak_doubles();
  static void reset_peak();
};

/// Dense row-major matrix of doubles; the universal numeric carrier.
class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix2D(std::initializer_list<std::initializer_list<double>> rows);
  Matrix2D(const Matrix2D& other);
  Matrix2D(Matrix2D&& other) noexcept;
  Matrix2D& operator=(const Matrix2D& other);
  Matrix2D& operator=(Matrix2D&& other) noexcept;
  ~Matrix2D();

  static Matrix2D identity(std::size_t n);
  static Matrix2D column(const std::vector<double>& values);
  static Matrix2D row(const std::vector<double>& values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& storage() const { return data_; }

  std::string shape_str() const;  // "RxC"
  bool all_finite() const;
  void fill(double v);

  bool operator==(const Matrix2D& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Standard matrix product. Throws ShapeError naming both shapes when the
/// inner dimensions disagree.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);

Matrix2D transpose(const Matrix2D& m);
Matrix2D add(const Matrix2D& a, const Matrix2D& b);
Matrix2D sub(const Matrix2D& a, const Matrix2D& b);
Matrix2D hadamard(const Matrix2D& a, const Matrix2D& b);
Matrix2D scalar_mul(const Matrix2D& m, double c);

/// Row-wise softmax with per-row max subtraction, so extreme logits stay
/// finite. Every output row is a simplex.
Matrix2D softmax_rows(const Matrix2D& m);

/// Softmax over the permitted entries of each row; forbidden entries are
/// exactly zero in the output. `allowed` is row-major, same shape as `m`,
/// nullptr meaning everything is permitted (then this IS softmax_rows —
/// both run the identical kernel). A fully-masked row is a contract error.
Matrix2D masked_softmax_rows(const Matrix2D& m, const std::uint8_t* allowed);

void throw_shape_error(const char* op, const Matrix2D& a, const Matrix2D& b);

}  // namespace hain

#endif  // HAIN_MATRIX_HPP
