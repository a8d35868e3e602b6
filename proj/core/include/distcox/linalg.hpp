#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace distcox {

using Vector = std::vector<double>;

// Small dense row-major matrix. Models in this package are low-dimensional
// (p is the covariate count), so no sparse or blocked machinery is needed.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& data() const { return a_; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector& operator+=(Vector& a, const Vector& b);
Vector scaled(const Vector& a, double s);
double dot(const Vector& a, const Vector& b);
double max_abs(const Vector& a);

// x * y' added into m with scale s.
void add_outer(Matrix& m, const Vector& x, const Vector& y, double s);

struct NewtonStepResult {
  Vector step;
  std::optional<Matrix> inverse;
};

// Solves info * step = grad through a Cholesky factorization; `info` must be
// symmetric positive definite (it is the observed information, the negated
// Hessian of a concave log likelihood). When want_inverse is set the full
// inverse is returned as well, which callers request once at the final
// iteration to obtain the covariance of the estimates.
//
// Throws NotSymmetric when the input is asymmetric beyond 1e-9 relative, and
// SingularHessian when a pivot falls at or below p * eps * max(diagonal) --
// the signature of a constant or collinear covariate. There is deliberately
// no ridge or pivoting fallback: a singular system is a modeling error the
// caller must see.
NewtonStepResult solve_newton_step(const Matrix& info, const Vector& grad,
                                   bool want_inverse);

// Inverse through the same factorization; result is symmetrized exactly as
// (A + A^T) / 2 before returning.
Matrix invert_spd(const Matrix& info);

}  // namespace distcox
