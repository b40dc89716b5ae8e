#pragma once

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"
#include "hetgp/vecchia.hpp"

namespace hetgp {

// Replication-collapsed marginal log likelihood of the mean process, dense in
// the unique sites. Equal to loglik_full_N on the expanded data but costing
// O(n^3) instead of O(N^3):
//   Ups      = K_theta(X_n) + diag(lambda_i / a_i)
//   tau2_hat = (sum_i (a_i/lambda_i) s2_i + ybar' Ups^{-1} ybar + beta) / (N + alpha)
//   loglik   = -((N + alpha)/2) log tau2_hat - (1/2) log|Ups|
//              - (1/2) sum_i [(a_i - 1) log lambda_i + log a_i],
// where s2_i is the mean squared deviation at site i, so (a_i/lambda_i) s2_i
// recovers sum_j (y_ij - ybar_i)^2 / lambda_i. lambda is per unique site.
LoglikResult woodbury_loglik(const ReplicatedDesign& d, const Vector& lambda,
                             const Vector& theta, const ScalePrior& prior);

// Same quantity with the dense solve against Ups replaced by a sparse factor.
// U must have been built on s with working covariance K_theta +
// diag(lambda_i / a_i) in position order; lambda is in site order. Exact when
// the factor conditions on everything.
LoglikResult vecchia_woodbury_loglik(const ReplicatedDesign& d, const VecchiaStructure& s,
                                     const SparseU& U, const Vector& lambda,
                                     const ScalePrior& prior);

// Marginal log likelihood of the latent log-variance field ell (site order)
// under its own GP with nugget g and scale integrated out. Dense form:
//   loglik = -((n + alpha)/2) log tau2_hat - (1/2) log|K_theta + g I|,
//   tau2_hat = (ell' (K_theta + g I)^{-1} ell + beta) / (n + alpha).
LoglikResult latent_loglik(const Matrix& X, const Vector& ell, const Vector& theta,
                           double g, const ScalePrior& prior);

// Sparse-factor form; U built on s with working covariance K_theta + g I.
// ell_ord is in position order.
LoglikResult vecchia_latent_loglik(const VecchiaStructure& s, const SparseU& U,
                                   const Vector& ell_ord, const ScalePrior& prior);

// sum_i (a_i / lambda_i) s2_i, the replicate residual part of tau2_hat.
double replicate_residual_term(const ReplicatedDesign& d, const Vector& lambda);

// sum_i [(a_i - 1) log lambda_i + log a_i], the replicate part of the
// collapsed log determinant.
double replicate_logdet_term(const ReplicatedDesign& d, const Vector& lambda);

}  // namespace hetgp
