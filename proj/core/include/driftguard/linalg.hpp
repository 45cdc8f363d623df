#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace driftguard {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// Dimensions in this library are small (d <= 10, hidden widths <= 64), so a
/// plain contiguous buffer with explicit loops is all we need.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);
  static Matrix column(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> v);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix transpose() const;
  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_norm(std::span<const double> a);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// aᵀ·x
Vector matvec_t(const Matrix& a, std::span<const double> x);

/// Column means of an n×d matrix.
Vector column_means(const Matrix& x);

/// Select a subset of columns, in the given order.
Matrix select_columns(const Matrix& x, std::span<const std::size_t> cols);

/// Select a subset of rows, in the given order.
Matrix select_rows(const Matrix& x, std::span<const std::size_t> rows);

/// max_{ij} |aᵀa - I|, used for orthonormality checks.
double orthonormality_defect(const Matrix& a);

/// Solve the symmetric positive definite system a·x = b by Cholesky.
/// Returns false if the factorization meets a non-positive pivot.
bool cholesky_solve(const Matrix& a, std::span<const double> b, Vector& x);

}  // namespace driftguard
