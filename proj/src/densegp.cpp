#include "hetgp/densegp.hpp"

#include <cmath>
#include <string>

#include "hetgp/kernel.hpp"

namespace hetgp {

LoglikResult loglik_full_N(const Vector& Y, const Matrix& X, const Vector& lambda,
                           const Vector& theta, const ScalePrior& prior) {
  const Eigen::Index N = Y.size();
  if (N == 0) throw ConfigError("loglik_full_N: empty observation vector");
  if (X.rows() != N || lambda.size() != N) {
    throw ConfigError("loglik_full_N: X/lambda sizes must match Y");
  }
  if (N > kDenseCap) {
    throw ConfigError("loglik_full_N: N = " + std::to_string(N) +
                      " exceeds the dense cap of " + std::to_string(kDenseCap));
  }
  validate_lengthscales(theta);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i])) {
      throw ConfigError("loglik_full_N: lambda must be positive and finite");
    }
  }

  Matrix C = kernel_matrix_sym(X, theta);
  C.diagonal() += lambda;
  // The positive diagonal loading makes C SPD; no extra ridge.
  const auto llt = chol_spd(std::move(C), 0.0, "loglik_full_N");
  const Matrix& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) logdet += 2.0 * std::log(L(i, i));
  const Vector w = llt.matrixL().solve(Y);
  const double quad = w.squaredNorm();

  LoglikResult r;
  const double dof = static_cast<double>(N) + prior.alpha;
  r.tau2_hat = (quad + prior.beta) / dof;
  r.loglik = -0.5 * dof * std::log(r.tau2_hat) - 0.5 * logdet;
  return r;
}

DensePrediction kriging_predict_dense(const Matrix& X_train, const Vector& values,
                                      const Vector& diag_train, const Vector& theta,
                                      double tau2, const Matrix& X_test,
                                      const Vector& diag_test) {
  const Eigen::Index n = X_train.rows();
  const Eigen::Index p = X_test.rows();
  if (values.size() != n || diag_train.size() != n) {
    throw ConfigError("kriging_predict_dense: training sizes disagree");
  }
  if (diag_test.size() != p) {
    throw ConfigError("kriging_predict_dense: test diagonal size disagrees");
  }
  if (n > kDenseCap) throw ConfigError("kriging_predict_dense: exceeds dense cap");
  validate_lengthscales(theta);

  Matrix C = kernel_matrix_sym(X_train, theta);
  C.diagonal() += diag_train;
  const auto llt = chol_spd(std::move(C), 0.0, "kriging_predict_dense");
  const Matrix Kcross = kernel_matrix(X_test, X_train, theta);  // p x n
  const Vector alpha = llt.solve(values);

  DensePrediction out;
  out.mean = Kcross * alpha;
  Matrix Ktt = kernel_matrix_sym(X_test, theta);
  Ktt.diagonal() += diag_test;
  const Matrix V = llt.matrixL().solve(Kcross.transpose());  // n x p
  out.cov = tau2 * (Ktt - V.transpose() * V);
  return out;
}

}  // namespace hetgp
