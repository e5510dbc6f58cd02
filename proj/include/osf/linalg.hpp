#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "osf/error.hpp"

namespace osf {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Column-stacking vectorization: vec(A X B) = (B^T (x) A) vec(X).
inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw ShapeError("unvec: length is not dim^2");
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

/// |n><m| on a dim-dimensional space.
inline Matrix matrix_unit(Eigen::Index dim, Eigen::Index n, Eigen::Index m) {
  Matrix e = Matrix::Zero(dim, dim);
  e(n, m) = 1.0;
  return e;
}

inline double hermiticity_error(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

/// Operator (spectral) norm.
inline double op_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Trace norm sum |sigma_i|.
inline double trace_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

inline double trace_distance(const Matrix& a, const Matrix& b) { return 0.5 * trace_norm(a - b); }

inline Matrix expm(const Matrix& m) { return m.exp(); }

}  // namespace osf
