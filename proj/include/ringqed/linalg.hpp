#pragma once

#include <cstddef>
#include <vector>

namespace ringqed {

/// Minimal dense row-major matrix; just enough for the normal equations of a
/// small least-squares problem.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Solve A x = b for symmetric positive definite A by Cholesky.
/// Returns false (and leaves x unspecified) if A is not positive definite.
bool cholesky_solve(const Matrix& a, const std::vector<double>& b, std::vector<double>& x);

/// Invert a symmetric positive definite matrix. Returns false on failure.
bool invert_spd(const Matrix& a, Matrix& inv);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> symmetric_eigenvalues(Matrix a);

}  // namespace ringqed
