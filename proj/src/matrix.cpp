#include "hain/matrix.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <utility>

#include "hain/common.hpp"

namespace hain {

namespace {

std::atomic<std::int64_t> g_live{0};
std::atomic<std::int64_t> g_peak{0};

void track_alloc(std::int64_t n) {
  if (n == 0) return;
  const std::int64_t now = g_live.fetch_add(n) + n;
  std::int64_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void track_free(std::int64_t n) {
  if (n != 0) g_live.fetch_sub(n);
}

}  // namespace

std::int64_t AllocStats::live_doubles() { return g_live.load(); }
std::int64_t AllocStats::peak_doubles() { return g_peak.load(); }
void AllocStats::reset_peak() { g_peak.store(g_live.load()); }

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  track_alloc(static_cast<std::int64_t>(data_.size()));
}

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix2D: data length " + std::to_string(data_.size()) +
                     " does not equal " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
  track_alloc(static_cast<std::int64_t>(data_.size()));
}

Matrix2D::Matrix2D(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw ShapeError("Matrix2D: ragged initializer rows");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
  track_alloc(static_cast<std::int64_t>(data_.size()));
}

Matrix2D::Matrix2D(const Matrix2D& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
  track_alloc(static_cast<std::int64_t>(data_.size()));
}

Matrix2D::Matrix2D(Matrix2D&& other) noexcept
    : rows_(other.rows_), cols_(other.cols_), data_(std::move(other.data_)) {
  other.rows_ = other.cols_ = 0;
  other.data_.clear();
}

Matrix2D& Matrix2D::operator=(const Matrix2D& other) {
  if (this == &other) return *this;
  track_free(static_cast<std::int64_t>(data_.size()));
  rows_ = other.rows_;
  cols_ = other.cols_;
  data_ = other.data_;
  track_alloc(static_cast<std::int64_t>(data_.size()));
  return *this;
}

Matrix2D& Matrix2D::operator=(Matrix2D&& other) noexcept {
  if (this == &other) return *this;
  track_free(static_cast<std::int64_t>(data_.size()));
  rows_ = other.rows_;
  cols_ = other.cols_;
  data_ = std::move(other.data_);
  other.rows_ = other.cols_ = 0;
  other.data_.clear();
  return *this;
}

Matrix2D::~Matrix2D() { track_free(static_cast<std::int64_t>(data_.size())); }

Matrix2D Matrix2D::identity(std::size_t n) {
  Matrix2D m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix2D Matrix2D::column(const std::vector<double>& values) {
  return Matrix2D(values.size(), 1, values);
}

Matrix2D Matrix2D::row(const std::vector<double>& values) {
  return Matrix2D(1, values.size(), values);
}

std::string Matrix2D::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix2D::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix2D::fill(double v) {
  for (double& x : data_) x = v;
}

void throw_shape_error(const char* op, const Matrix2D& a, const Matrix2D& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                   " and " + b.shape_str());
}

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) throw_shape_error("matmul", a, b);
  Matrix2D out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* orow = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix2D transpose(const Matrix2D& m) {
  Matrix2D out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix2D add(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape_error("add", a, b);
  Matrix2D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix2D sub(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape_error("sub", a, b);
  Matrix2D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix2D hadamard(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape_error("hadamard", a, b);
  Matrix2D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix2D scalar_mul(const Matrix2D& m, double c) {
  Matrix2D out = m;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
  return out;
}

Matrix2D masked_softmax_rows(const Matrix2D& m, const std::uint8_t* allowed) {
  if (m.empty()) throw ContractError("softmax_rows: empty matrix");
  Matrix2D out(m.rows(), m.cols());
  const std::size_t c = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.data() + i * c;
    const std::uint8_t* am = allowed ? allowed + i * c : nullptr;
    bool has_permitted = false;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (am && !am[j]) continue;
      has_permitted = true;
      if (in[j] > mx) mx = in[j];
    }
    if (!has_permitted) {
      throw ContractError("masked_softmax_rows: row " + std::to_string(i) +
                          " has no permitted entries");
    }
    // Non-finite rows (overflowed scores) propagate NaN instead of faking
    // a distribution; finite rows never take this branch.
    if (!std::isfinite(mx)) mx = 0.0;
    double sum = 0.0;
    double* orow = out.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      if (am && !am[j]) {
        orow[j] = 0.0;
        continue;
      }
      orow[j] = std::exp(in[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= sum;
  }
  return out;
}

Matrix2D softmax_rows(const Matrix2D& m) { return masked_softmax_rows(m, nullptr); }

}  // namespace hain
