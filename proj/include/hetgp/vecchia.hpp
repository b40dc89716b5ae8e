#pragma once

#include <cstdint>
#include <vector>

#include "hetgp/common.hpp"

namespace hetgp {

// Ordering and conditioning sets for a sparse inverse-Cholesky approximation.
// Sites are visited in a seeded random order; each position conditions on up
// to m nearest earlier positions (Euclidean distance, ties broken toward the
// lower original site index). Conditioning sets are stored sorted by
// position, and for a fixed ordering they are nested as m grows.
struct VecchiaStructure {
  std::vector<int> order;              // position -> original site index
  std::vector<std::vector<int>> cond;  // position -> earlier positions
  Matrix Xord;                         // points in position order
  int m = 0;

  int n() const { return static_cast<int>(order.size()); }
  int dim() const { return static_cast<int>(Xord.cols()); }
};

VecchiaStructure build_structure(const Matrix& X, int m, std::uint64_t seed);

// Supplies working-covariance pieces for one column: the symmetric block over
// the conditioning set c goes into the top-left k x k corner of Scc_buf, the
// cross vector against position p into the first k entries of Sci_buf
// (k = |c|). Buffers are caller-owned scratch of capacity >= max set size.
class ColumnCov {
public:
  virtual ~ColumnCov() = default;
  virtual void column(int p, const std::vector<int>& c, Matrix& Scc_buf,
                      Vector& Sci_buf, double& Sii) const = 0;
};

// Working covariance = squared-exponential kernel + diagonal, evaluated on
// demand. dadd is indexed by position.
class KernelDiagColumns final : public ColumnCov {
public:
  KernelDiagColumns(const Matrix& pts, Vector theta, Vector dadd);
  void column(int p, const std::vector<int>& c, Matrix& Scc_buf, Vector& Sci_buf,
              double& Sii) const override;

private:
  const Matrix& pts_;
  Vector theta_;
  Vector dadd_;
};

// Same working covariance, but the pure-kernel pieces for every column are
// precomputed once per lengthscale vector. Rebuilding the factor after a
// change that only touches the diagonal (fresh latent draw) then skips all
// kernel evaluations. set_diag must be called before each factor build.
class CachedKernelColumns final : public ColumnCov {
public:
  explicit CachedKernelColumns(const VecchiaStructure& s);
  void rebuild(const Vector& theta);
  void set_diag(Vector dadd);  // position order
  const Vector& theta() const { return theta_; }
  void column(int p, const std::vector<int>& c, Matrix& Scc_buf, Vector& Sci_buf,
              double& Sii) const override;

private:
  const VecchiaStructure& s_;
  Vector theta_;
  Vector dadd_;
  std::vector<int> block_ptr_;  // per column offset into blocks_
  std::vector<double> blocks_;  // K(c,c) row-major then K(c,p), per column
};

// Sparse upper-triangular factor U with U Sigma U^T = I for the working
// covariance Sigma implied by the structure: column p has off-diagonal rows
// cond[p] and a positive diagonal. Stored column-compressed.
struct SparseU {
  int n = 0;
  std::vector<int> col_ptr;   // n + 1
  std::vector<int> row_idx;   // concatenated conditioning sets
  std::vector<double> val;    // off-diagonal values, aligned with row_idx
  std::vector<double> dinv;   // diagonal U[p,p] = 1/sigma_p

  // sum_p log U[p,p] = -(1/2) log|Sigma|.
  double sum_log_diag() const;
  // U^T v.
  Vector mult_transpose(const Vector& v) const;
  // v^T U U^T v = v^T Sigma^{-1} v.
  double quad(const Vector& v) const;
  // Solve U^T x = rhs (forward substitution).
  Vector solve_transpose(const Vector& rhs) const;
  // Solve U x = rhs (backward substitution).
  Vector solve(const Vector& rhs) const;
};

// Builds the factor column by column. Each column is independent of the
// others, so build order cannot change the result. jitter is added to the
// working covariance diagonal before factorizing (0 in normal operation; the
// sampler's retry path passes a small ridge). Throws NumericError naming the
// failing column if a conditional variance is not positive.
SparseU build_U(const VecchiaStructure& s, const ColumnCov& cov, double jitter = 0.0);

// Joint factor for prediction: training columns are left untouched (the
// training factor is reused as-is) and test points are appended in a seeded
// random order. Each test column conditions on up to m_pred nearest points
// among all training positions and earlier test positions; ties prefer
// training points, then lower index. Only the test-block columns are stored
// here.
struct StackedU {
  int p = 0;
  std::vector<int> test_order;               // stacked position -> original test row
  std::vector<std::vector<int>> train_rows;  // training positions per test column
  std::vector<Vector> train_vals;
  std::vector<std::vector<int>> test_rows;   // earlier stacked test positions
  std::vector<Vector> test_vals;
  Vector dinv;
};

StackedU build_stacked_U(const VecchiaStructure& s, const Matrix& X_test, int m_pred,
                         const Vector& theta, const Vector& dadd_train,
                         const Vector& dadd_test, std::uint64_t seed,
                         double jitter = 0.0);

struct StackedPrediction {
  Vector mean;      // original test row order
  Vector var_diag;  // unscaled (multiply by tau2)
  Matrix cov;       // filled only on request
};

// Conditional moments of the test block given training values (position
// order). Derived from the joint precision: mean = -(U_X^T)^{-1} U_{nX}^T y,
// covariance = (U_X U_X^T)^{-1}.
StackedPrediction predict_from_stacked(const StackedU& su, const Vector& values_ord,
                                       bool want_cov = false);

// Indices of the (up to) m rows of pts nearest to x, ties toward lower row
// index, returned sorted ascending. Shared by the independent per-point
// prediction path.
std::vector<int> nearest_rows(const Matrix& pts, const Vector& x, int m);

}  // namespace hetgp
