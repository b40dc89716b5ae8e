#include "hetgp/kernel.hpp"

#include <cmath>
#include <string>

namespace hetgp {

void validate_lengthscales(const Vector& theta) {
  if (theta.size() == 0) throw ConfigError("lengthscales: empty vector");
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (!std::isfinite(theta[k]) || theta[k] <= 0.0) {
      throw ConfigError("lengthscales: component " + std::to_string(k) +
                        " must be finite and positive");
    }
  }
}

double kernel_value(const Vector& x, const Vector& z, const Vector& theta) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double d = x[k] - z[k];
    s += d * d / theta[k];
  }
  return std::exp(-s);
}

Matrix kernel_matrix(const Matrix& A, const Matrix& B, const Vector& theta) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.rows();
  Matrix D = Matrix::Zero(n, m);
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double inv = 1.0 / theta[k];
    for (Eigen::Index j = 0; j < m; ++j) {
      D.col(j).array() += (A.col(k).array() - B(j, k)).square() * inv;
    }
  }
  return (-D).array().exp();
}

Matrix kernel_matrix_sym(const Matrix& A, const Vector& theta) {
  const Eigen::Index n = A.rows();
  Matrix K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double d = A(i, k) - A(j, k);
        s += d * d / theta[k];
      }
      const double v = std::exp(-s);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::LLT<Matrix> chol_spd(Matrix M, double jitter, const char* context) {
  if (jitter != 0.0) M.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(context) +
                       ": Cholesky factorization failed (matrix not positive definite)");
  }
  return llt;
}

}  // namespace hetgp
