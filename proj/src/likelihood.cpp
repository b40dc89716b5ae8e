#include "hetgp/likelihood.hpp"

#include <cmath>

#include "hetgp/kernel.hpp"

namespace hetgp {

namespace {

void check_lambda(const Vector& lambda, int n) {
  if (lambda.size() != n) throw ConfigError("likelihood: lambda size mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i])) {
      throw ConfigError("likelihood: lambda must be positive and finite");
    }
  }
}

}  // namespace

double replicate_residual_term(const ReplicatedDesign& d, const Vector& lambda) {
  double s = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    s += static_cast<double>(d.a[i]) / lambda[i] * d.s2[i];
  }
  return s;
}

double replicate_logdet_term(const ReplicatedDesign& d, const Vector& lambda) {
  double s = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    s += (static_cast<double>(d.a[i]) - 1.0) * std::log(lambda[i]) +
         std::log(static_cast<double>(d.a[i]));
  }
  return s;
}

LoglikResult woodbury_loglik(const ReplicatedDesign& d, const Vector& lambda,
                             const Vector& theta, const ScalePrior& prior) {
  const int n = d.n();
  check_lambda(lambda, n);
  validate_lengthscales(theta);

  Matrix Ups = kernel_matrix_sym(d.X, theta);
  for (int i = 0; i < n; ++i) Ups(i, i) += lambda[i] / static_cast<double>(d.a[i]);
  const auto llt = chol_spd(std::move(Ups), 0.0, "woodbury_loglik");
  const Matrix& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  const Vector w = llt.matrixL().solve(d.ybar);
  const double quad = w.squaredNorm();

  LoglikResult r;
  const double dof = static_cast<double>(d.N) + prior.alpha;
  r.tau2_hat = (replicate_residual_term(d, lambda) + quad + prior.beta) / dof;
  r.loglik = -0.5 * dof * std::log(r.tau2_hat) - 0.5 * logdet -
             0.5 * replicate_logdet_term(d, lambda);
  return r;
}

LoglikResult vecchia_woodbury_loglik(const ReplicatedDesign& d, const VecchiaStructure& s,
                                     const SparseU& U, const Vector& lambda,
                                     const ScalePrior& prior) {
  const int n = d.n();
  check_lambda(lambda, n);
  if (s.n() != n || U.n != n) throw ConfigError("vecchia_woodbury_loglik: size mismatch");

  Vector ybar_ord(n);
  for (int p = 0; p < n; ++p) ybar_ord[p] = d.ybar[s.order[static_cast<std::size_t>(p)]];
  const double quad = U.quad(ybar_ord);

  LoglikResult r;
  const double dof = static_cast<double>(d.N) + prior.alpha;
  r.tau2_hat = (replicate_residual_term(d, lambda) + quad + prior.beta) / dof;
  r.loglik = -0.5 * dof * std::log(r.tau2_hat) + U.sum_log_diag() -
             0.5 * replicate_logdet_term(d, lambda);
  return r;
}

LoglikResult latent_loglik(const Matrix& X, const Vector& ell, const Vector& theta,
                           double g, const ScalePrior& prior) {
  const int n = static_cast<int>(X.rows());
  if (ell.size() != n) throw ConfigError("latent_loglik: ell size mismatch");
  if (!(g > 0.0)) throw ConfigError("latent_loglik: nugget must be positive");
  validate_lengthscales(theta);

  Matrix C = kernel_matrix_sym(X, theta);
  C.diagonal().array() += g;
  const auto llt = chol_spd(std::move(C), 0.0, "latent_loglik");
  const Matrix& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  const Vector w = llt.matrixL().solve(ell);

  LoglikResult r;
  const double dof = static_cast<double>(n) + prior.alpha;
  r.tau2_hat = (w.squaredNorm() + prior.beta) / dof;
  r.loglik = -0.5 * dof * std::log(r.tau2_hat) - 0.5 * logdet;
  return r;
}

LoglikResult vecchia_latent_loglik(const VecchiaStructure& s, const SparseU& U,
                                   const Vector& ell_ord, const ScalePrior& prior) {
  const int n = s.n();
  if (ell_ord.size() != n || U.n != n) {
    throw ConfigError("vecchia_latent_loglik: size mismatch");
  }
  LoglikResult r;
  const double dof = static_cast<double>(n) + prior.alpha;
  r.tau2_hat = (U.quad(ell_ord) + prior.beta) / dof;
  r.loglik = -0.5 * dof * std::log(r.tau2_hat) + U.sum_log_diag();
  return r;
}

}  // namespace hetgp
