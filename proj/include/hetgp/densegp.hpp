#pragma once

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"

namespace hetgp {

// Dense reference paths. These are O(N^3) and capped, meant for moderate
// sizes, cross-checks, and the timing comparison against the collapsed
// representation; the production fit goes through the sparse factors.
inline constexpr long long kDenseCap = 4000;

// Marginal log likelihood of the full observation vector Y (length N) under
//   Y ~ N(0, tau2 * (K_theta(X) + diag(lambda))),
// with tau2 integrated out against ScalePrior. Additive constants independent
// of (theta, lambda) are dropped:
//   loglik = -((N + alpha)/2) log tau2_hat - (1/2) log|K + diag(lambda)|,
//   tau2_hat = (Y' (K + diag(lambda))^{-1} Y + beta) / (N + alpha).
LoglikResult loglik_full_N(const Vector& Y, const Matrix& X, const Vector& lambda,
                           const Vector& theta, const ScalePrior& prior);

struct DensePrediction {
  Vector mean;
  Matrix cov;  // already scaled by tau2
};

// Exact kriging under working covariance K_theta + diag(diag_train) given
// observed values at the training rows; test covariance gets diag_test added
// on its diagonal. The oracle for the sparse predictive paths.
DensePrediction kriging_predict_dense(const Matrix& X_train, const Vector& values,
                                      const Vector& diag_train, const Vector& theta,
                                      double tau2, const Matrix& X_test,
                                      const Vector& diag_test);

}  // namespace hetgp
