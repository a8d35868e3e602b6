#include "distcox/linalg.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "distcox/error.hpp"

namespace distcox {

Matrix& Matrix::operator+=(const Matrix& o) {
  assert(rows_ == o.rows_ && cols_ == o.cols_);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  assert(rows_ == o.rows_ && cols_ == o.cols_);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : a_) v *= s;
  return *this;
}

Vector operator+(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vector operator-(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vector& operator+=(Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Vector scaled(const Vector& a, double s) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

double dot(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const Vector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

void add_outer(Matrix& m, const Vector& x, const Vector& y, double s) {
  assert(m.rows() == x.size() && m.cols() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) m(i, j) += s * x[i] * y[j];
}

namespace {

void check_square_symmetric(const Matrix& a) {
  if (a.rows() != a.cols())
    throw NotSymmetric("matrix is not square: " + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()));
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::fabs(v));
  const double tol = 1e-9 * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j) - a(j, i)) > tol)
        throw NotSymmetric("asymmetry at (" + std::to_string(i) + "," +
                           std::to_string(j) + "): " +
                           std::to_string(a(i, j) - a(j, i)));
}

// Lower Cholesky factor of a symmetric positive definite matrix.
Matrix cholesky(const Matrix& a) {
  check_square_symmetric(a);
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a(i, i)))
      throw SingularHessian("non-finite diagonal in information matrix");
    max_diag = std::max(max_diag, std::fabs(a(i, i)));
  }
  const double pivot_floor =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > pivot_floor))
      throw SingularHessian(
          "information matrix is singular or indefinite (pivot " +
          std::to_string(d) + " at column " + std::to_string(j) +
          "); check for constant or collinear covariates");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// Solves L L^T x = b in place of x.
Vector cholesky_solve(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  Vector x(b);
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Matrix cholesky_inverse(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = cholesky_solve(l, e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  // Symmetrize exactly; the column solves agree only to rounding.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  return inv;
}

}  // namespace

NewtonStepResult solve_newton_step(const Matrix& info, const Vector& grad,
                                   bool want_inverse) {
  if (info.rows() != grad.size())
    throw NotSymmetric("information/gradient dimension mismatch");
  const Matrix l = cholesky(info);
  NewtonStepResult r;
  r.step = cholesky_solve(l, grad);
  if (want_inverse) r.inverse = cholesky_inverse(l);
  return r;
}

Matrix invert_spd(const Matrix& info) {
  return cholesky_inverse(cholesky(info));
}

}  // namespace distcox
