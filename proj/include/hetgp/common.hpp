#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hetgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Bad options, flags, or parameter combinations. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing/unreadable files or malformed file content. CLI exit code 3.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unrecoverable numerical failure (after any retry policy). CLI exit code 4.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inverse-gamma prior on a process scale, parameterised so that alpha plays
// the role of pseudo-observations and beta of pseudo-sum-of-squares: the
// profiled scale is (quadratic form + beta) / (count + alpha). alpha=beta=0
// gives the reference prior.
struct ScalePrior {
  double alpha = 10.0;
  double beta = 4.0;
};

// A marginal log likelihood together with the scale profiled out under the
// inverse-gamma prior above.
struct LoglikResult {
  double loglik = 0.0;
  double tau2_hat = 0.0;
};

}  // namespace hetgp
