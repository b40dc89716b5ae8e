#pragma once

#include <Eigen/Cholesky>

#include "hetgp/common.hpp"

namespace hetgp {

// Jitter added to the diagonal before factorising a bare kernel matrix (one
// with no positive diagonal loading of its own).
inline constexpr double kCholJitter = 1e-8;

// Throws ConfigError unless every component is finite and positive.
void validate_lengthscales(const Vector& theta);

// Anisotropic squared-exponential correlation
//   k(x, z) = exp(-sum_k (x_k - z_k)^2 / theta_k),
// unit variance, so values lie in (0, 1] with k(x, x) = 1 exactly.
double kernel_value(const Vector& x, const Vector& z, const Vector& theta);

// Cross-correlation block between the rows of A (n x d) and B (m x d).
Matrix kernel_matrix(const Matrix& A, const Matrix& B, const Vector& theta);

// Symmetric block over the rows of A, exploiting symmetry and exact unit
// diagonal.
Matrix kernel_matrix_sym(const Matrix& A, const Vector& theta);

// Cholesky with a diagonal ridge. Throws NumericError (mentioning the caller
// supplied context) if the factorization fails even with the ridge.
Eigen::LLT<Matrix> chol_spd(Matrix M, double jitter, const char* context);

}  // namespace hetgp
