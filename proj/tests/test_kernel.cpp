#include <doctest.h>

#include <cmath>

#include "hetgp/kernel.hpp"
#include "hetgp/rng.hpp"
#include "oracles.hpp"

using namespace hetgp;

TEST_SUITE_BEGIN("kernel");

TEST_CASE("kernel value is 1 at zero distance and e^-1 at distance theta") {
  Vector x(2), z(2), theta(2);
  x << 0.3, 0.7;
  theta << 0.5, 0.9;
  CHECK(kernel_value(x, x, theta) == 1.0);

  // Put the whole squared distance in the first coordinate: (x1-z1)^2 = theta1.
  z = x;
  z[0] += std::sqrt(theta[0]);
  CHECK(kernel_value(x, z, theta) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(kernel_value(z, x, theta) == doctest::Approx(kernel_value(x, z, theta)).epsilon(1e-15));
}

TEST_CASE("kernel values stay in (0, 1]") {
  Rng r(3);
  Vector theta(3);
  theta << 0.2, 1.1, 0.6;
  for (int i = 0; i < 200; ++i) {
    Vector x(3), z(3);
    for (int k = 0; k < 3; ++k) {
      x[k] = r.uniform(-2.0, 2.0);
      z[k] = r.uniform(-2.0, 2.0);
    }
    const double v = kernel_value(x, z, theta);
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("kernel matrices agree with elementwise evaluation") {
  Rng r(5);
  Matrix A(6, 2), B(4, 2);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (int k = 0; k < 2; ++k) A(i, k) = r.uniform01();
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (int k = 0; k < 2; ++k) B(i, k) = r.uniform01();
  Vector theta(2);
  theta << 0.3, 0.8;

  const Matrix K = kernel_matrix(A, B, theta);
  REQUIRE(K.rows() == 6);
  REQUIRE(K.cols() == 4);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(K(i, j) ==
            doctest::Approx(kernel_value(A.row(i), B.row(j), theta)).epsilon(1e-14));
    }
  }

  const Matrix S = kernel_matrix_sym(A, theta);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(S(i, i) == 1.0);  // exact unit diagonal, not just approximate
    for (Eigen::Index j = 0; j < 6; ++j) {
      CHECK(S(i, j) == doctest::Approx(S(j, i)).epsilon(1e-15));
      CHECK(S(i, j) ==
            doctest::Approx(kernel_value(A.row(i), A.row(j), theta)).epsilon(1e-14));
    }
  }
}

TEST_CASE("lengthscale validation rejects bad values") {
  Vector ok(2);
  ok << 0.5, 1.0;
  CHECK_NOTHROW(validate_lengthscales(ok));
  Vector zero(2), neg(2), nan(2), empty(0);
  zero << 0.0, 1.0;
  neg << 0.5, -1.0;
  nan << 0.5, std::nan("");
  CHECK_THROWS_AS(validate_lengthscales(zero), ConfigError);
  CHECK_THROWS_AS(validate_lengthscales(neg), ConfigError);
  CHECK_THROWS_AS(validate_lengthscales(nan), ConfigError);
  CHECK_THROWS_AS(validate_lengthscales(empty), ConfigError);
}

TEST_CASE("chol_spd factors SPD matrices and reports failures with context") {
  Matrix I = Matrix::Identity(3, 3);
  const auto llt = chol_spd(I, 0.0, "test");
  CHECK(llt.matrixLLT()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  // Indefinite matrix: eigenvalues 3 and -1, beyond any small ridge.
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  bool threw = false;
  try {
    chol_spd(bad, kCholJitter, "indefinite-case");
  } catch (const NumericError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("indefinite-case") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("jitter rescues a borderline factorization") {
  // Rank-one matrix of ones is PSD but singular; a ridge makes it SPD.
  Matrix ones = Matrix::Ones(4, 4);
  CHECK_NOTHROW(chol_spd(ones, 1e-8, "ones"));
}

TEST_SUITE_END();
