#include "hetgp/vecchia.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "hetgp/kernel.hpp"
#include "hetgp/rng.hpp"

namespace hetgp {

namespace {

double sq_dist(const Matrix& A, int i, const Matrix& B, int j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const double d = A(i, k) - B(j, k);
    s += d * d;
  }
  return s;
}

}  // namespace

VecchiaStructure build_structure(const Matrix& X, int m, std::uint64_t seed) {
  const int n = static_cast<int>(X.rows());
  if (n == 0) throw ConfigError("build_structure: no points");
  if (m < 0) throw ConfigError("build_structure: m must be >= 0");
  VecchiaStructure s;
  s.m = m;
  Rng rng(seed);
  s.order = rng.permutation(n);
  s.Xord.resize(n, X.cols());
  for (int p = 0; p < n; ++p) s.Xord.row(p) = X.row(s.order[p]);

  s.cond.resize(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> cand;  // (distance, position)
  for (int p = 0; p < n; ++p) {
    const int k = std::min(m, p);
    auto& c = s.cond[static_cast<std::size_t>(p)];
    if (k == 0) continue;
    cand.clear();
    cand.reserve(static_cast<std::size_t>(p));
    for (int q = 0; q < p; ++q) cand.emplace_back(sq_dist(s.Xord, p, s.Xord, q), q);
    auto closer = [&](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      if (a.first != b.first) return a.first < b.first;
      return s.order[a.second] < s.order[b.second];
    };
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), closer);
    c.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) c[static_cast<std::size_t>(j)] = cand[static_cast<std::size_t>(j)].second;
    std::sort(c.begin(), c.end());
  }
  return s;
}

KernelDiagColumns::KernelDiagColumns(const Matrix& pts, Vector theta, Vector dadd)
    : pts_(pts), theta_(std::move(theta)), dadd_(std::move(dadd)) {
  validate_lengthscales(theta_);
  if (dadd_.size() != pts_.rows()) {
    throw ConfigError("KernelDiagColumns: diagonal size mismatch");
  }
}

void KernelDiagColumns::column(int p, const std::vector<int>& c, Matrix& Scc_buf,
                               Vector& Sci_buf, double& Sii) const {
  const int k = static_cast<int>(c.size());
  for (int j = 0; j < k; ++j) {
    const int cj = c[static_cast<std::size_t>(j)];
    Scc_buf(j, j) = 1.0 + dadd_[cj];
    for (int i = j + 1; i < k; ++i) {
      const int ci = c[static_cast<std::size_t>(i)];
      double s = 0.0;
      for (Eigen::Index t = 0; t < theta_.size(); ++t) {
        const double d = pts_(ci, t) - pts_(cj, t);
        s += d * d / theta_[t];
      }
      const double v = std::exp(-s);
      Scc_buf(i, j) = v;
      Scc_buf(j, i) = v;
    }
    double s = 0.0;
    for (Eigen::Index t = 0; t < theta_.size(); ++t) {
      const double d = pts_(cj, t) - pts_(p, t);
      s += d * d / theta_[t];
    }
    Sci_buf[j] = std::exp(-s);
  }
  Sii = 1.0 + dadd_[p];
}

CachedKernelColumns::CachedKernelColumns(const VecchiaStructure& s) : s_(s) {
  block_ptr_.resize(static_cast<std::size_t>(s.n()) + 1, 0);
  for (int p = 0; p < s.n(); ++p) {
    const int k = static_cast<int>(s.cond[static_cast<std::size_t>(p)].size());
    block_ptr_[static_cast<std::size_t>(p) + 1] =
        block_ptr_[static_cast<std::size_t>(p)] + k * k + k;
  }
  blocks_.resize(static_cast<std::size_t>(block_ptr_.back()));
}

void CachedKernelColumns::rebuild(const Vector& theta) {
  validate_lengthscales(theta);
  theta_ = theta;
  const Matrix& X = s_.Xord;
  for (int p = 0; p < s_.n(); ++p) {
    const auto& c = s_.cond[static_cast<std::size_t>(p)];
    const int k = static_cast<int>(c.size());
    double* blk = blocks_.data() + block_ptr_[static_cast<std::size_t>(p)];
    // K(c, c), column-major, followed by K(c, p).
    for (int j = 0; j < k; ++j) {
      const int cj = c[static_cast<std::size_t>(j)];
      blk[j * k + j] = 1.0;
      for (int i = j + 1; i < k; ++i) {
        const int ci = c[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (Eigen::Index t = 0; t < theta_.size(); ++t) {
          const double d = X(ci, t) - X(cj, t);
          s += d * d / theta_[t];
        }
        const double v = std::exp(-s);
        blk[j * k + i] = v;
        blk[i * k + j] = v;
      }
      double s = 0.0;
      for (Eigen::Index t = 0; t < theta_.size(); ++t) {
        const double d = X(cj, t) - X(p, t);
        s += d * d / theta_[t];
      }
      blk[k * k + j] = std::exp(-s);
    }
  }
}

void CachedKernelColumns::set_diag(Vector dadd) {
  if (dadd.size() != s_.n()) throw ConfigError("CachedKernelColumns: diagonal size");
  dadd_ = std::move(dadd);
}

void CachedKernelColumns::column(int p, const std::vector<int>& c, Matrix& Scc_buf,
                                 Vector& Sci_buf, double& Sii) const {
  if (theta_.size() == 0) throw ConfigError("CachedKernelColumns: rebuild not called");
  const int k = static_cast<int>(c.size());
  const double* blk = blocks_.data() + block_ptr_[static_cast<std::size_t>(p)];
  Scc_buf.topLeftCorner(k, k) = Eigen::Map<const Matrix>(blk, k, k);
  for (int j = 0; j < k; ++j) Scc_buf(j, j) += dadd_[c[static_cast<std::size_t>(j)]];
  Sci_buf.head(k) = Eigen::Map<const Vector>(blk + k * k, k);
  Sii = 1.0 + dadd_[p];
}

double SparseU::sum_log_diag() const {
  double s = 0.0;
  for (double d : dinv) s += std::log(d);
  return s;
}

Vector SparseU::mult_transpose(const Vector& v) const {
  Vector w(n);
  for (int p = 0; p < n; ++p) {
    double s = dinv[static_cast<std::size_t>(p)] * v[p];
    for (int idx = col_ptr[static_cast<std::size_t>(p)];
         idx < col_ptr[static_cast<std::size_t>(p) + 1]; ++idx) {
      s += val[static_cast<std::size_t>(idx)] * v[row_idx[static_cast<std::size_t>(idx)]];
    }
    w[p] = s;
  }
  return w;
}

double SparseU::quad(const Vector& v) const {
  double acc = 0.0;
  for (int p = 0; p < n; ++p) {
    double s = dinv[static_cast<std::size_t>(p)] * v[p];
    for (int idx = col_ptr[static_cast<std::size_t>(p)];
         idx < col_ptr[static_cast<std::size_t>(p) + 1]; ++idx) {
      s += val[static_cast<std::size_t>(idx)] * v[row_idx[static_cast<std::size_t>(idx)]];
    }
    acc += s * s;
  }
  return acc;
}

Vector SparseU::solve_transpose(const Vector& rhs) const {
  Vector x(n);
  for (int p = 0; p < n; ++p) {
    double s = rhs[p];
    for (int idx = col_ptr[static_cast<std::size_t>(p)];
         idx < col_ptr[static_cast<std::size_t>(p) + 1]; ++idx) {
      s -= val[static_cast<std::size_t>(idx)] * x[row_idx[static_cast<std::size_t>(idx)]];
    }
    x[p] = s / dinv[static_cast<std::size_t>(p)];
  }
  return x;
}

Vector SparseU::solve(const Vector& rhs) const {
  Vector x = rhs;
  for (int q = n - 1; q >= 0; --q) {
    x[q] /= dinv[static_cast<std::size_t>(q)];
    const double xq = x[q];
    for (int idx = col_ptr[static_cast<std::size_t>(q)];
         idx < col_ptr[static_cast<std::size_t>(q) + 1]; ++idx) {
      x[row_idx[static_cast<std::size_t>(idx)]] -= val[static_cast<std::size_t>(idx)] * xq;
    }
  }
  return x;
}

SparseU build_U(const VecchiaStructure& s, const ColumnCov& cov, double jitter) {
  const int n = s.n();
  SparseU u;
  u.n = n;
  u.col_ptr.resize(static_cast<std::size_t>(n) + 1, 0);
  for (int p = 0; p < n; ++p) {
    u.col_ptr[static_cast<std::size_t>(p) + 1] =
        u.col_ptr[static_cast<std::size_t>(p)] +
        static_cast<int>(s.cond[static_cast<std::size_t>(p)].size());
  }
  u.row_idx.resize(static_cast<std::size_t>(u.col_ptr.back()));
  u.val.resize(static_cast<std::size_t>(u.col_ptr.back()));
  u.dinv.resize(static_cast<std::size_t>(n));

  int kmax = 1;
  for (const auto& c : s.cond) kmax = std::max(kmax, static_cast<int>(c.size()));
  Matrix Scc(kmax, kmax);
  Vector Sci(kmax), w(kmax);

  for (int p = 0; p < n; ++p) {
    const auto& c = s.cond[static_cast<std::size_t>(p)];
    const int k = static_cast<int>(c.size());
    double Sii = 0.0;
    cov.column(p, c, Scc, Sci, Sii);
    Sii += jitter;
    double sigma2;
    if (k == 0) {
      sigma2 = Sii;
    } else {
      auto blk = Scc.topLeftCorner(k, k);
      if (jitter != 0.0) blk.diagonal().array() += jitter;
      Eigen::LLT<Eigen::Ref<Matrix>> llt(blk);
      if (llt.info() != Eigen::Success) {
        throw NumericError("build_U: conditioning block not positive definite at column " +
                           std::to_string(p) + " (site " +
                           std::to_string(s.order[static_cast<std::size_t>(p)]) + ")");
      }
      auto wh = w.head(k);
      wh = Sci.head(k);
      llt.matrixL().solveInPlace(wh);
      sigma2 = Sii - wh.squaredNorm();
      llt.matrixU().solveInPlace(wh);  // now the regression weights B
      if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw NumericError("build_U: nonpositive conditional variance at column " +
                           std::to_string(p) + " (site " +
                           std::to_string(s.order[static_cast<std::size_t>(p)]) + ")");
      }
      const double inv_sd = 1.0 / std::sqrt(sigma2);
      for (int j = 0; j < k; ++j) {
        const int idx = u.col_ptr[static_cast<std::size_t>(p)] + j;
        u.row_idx[static_cast<std::size_t>(idx)] = c[static_cast<std::size_t>(j)];
        u.val[static_cast<std::size_t>(idx)] = -wh[j] * inv_sd;
      }
      u.dinv[static_cast<std::size_t>(p)] = inv_sd;
      continue;
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw NumericError("build_U: nonpositive variance at column " + std::to_string(p));
    }
    u.dinv[static_cast<std::size_t>(p)] = 1.0 / std::sqrt(sigma2);
  }
  return u;
}

std::vector<int> nearest_rows(const Matrix& pts, const Vector& x, int m) {
  const int n = static_cast<int>(pts.rows());
  const int k = std::min(m, n);
  if (k <= 0) return {};
  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < pts.cols(); ++t) {
      const double d = pts(i, t) - x[t];
      s += d * d;
    }
    cand[static_cast<std::size_t>(i)] = {s, i};
  }
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = cand[static_cast<std::size_t>(j)].second;
  std::sort(out.begin(), out.end());
  return out;
}

StackedU build_stacked_U(const VecchiaStructure& s, const Matrix& X_test, int m_pred,
                         const Vector& theta, const Vector& dadd_train,
                         const Vector& dadd_test, std::uint64_t seed, double jitter) {
  validate_lengthscales(theta);
  const int n = s.n();
  const int p = static_cast<int>(X_test.rows());
  if (m_pred < 0) throw ConfigError("build_stacked_U: m_pred must be >= 0");
  if (dadd_train.size() != n || dadd_test.size() != p) {
    throw ConfigError("build_stacked_U: diagonal sizes disagree");
  }
  StackedU su;
  su.p = p;
  if (p == 0) return su;
  if (X_test.cols() != s.Xord.cols()) {
    throw ConfigError("build_stacked_U: test dimension mismatch");
  }

  Rng rng(seed);
  su.test_order = rng.permutation(p);
  Matrix Xte(p, X_test.cols());
  for (int q = 0; q < p; ++q) Xte.row(q) = X_test.row(su.test_order[static_cast<std::size_t>(q)]);

  su.train_rows.resize(static_cast<std::size_t>(p));
  su.train_vals.resize(static_cast<std::size_t>(p));
  su.test_rows.resize(static_cast<std::size_t>(p));
  su.test_vals.resize(static_cast<std::size_t>(p));
  su.dinv.resize(p);

  const int kmax = std::max(1, std::min(m_pred, n + p - 1));
  Matrix Scc(kmax, kmax);
  Vector Sci(kmax), w(kmax);
  Matrix G(kmax, X_test.cols());
  Vector gd(kmax);
  // (distance, test?, tiebreak index): training candidates win ties, then the
  // lower original index.
  std::vector<std::tuple<double, int, int>> cand;

  for (int q = 0; q < p; ++q) {
    const int avail = n + q;
    const int k = std::min(m_pred, avail);
    cand.clear();
    cand.reserve(static_cast<std::size_t>(avail));
    for (int r = 0; r < n; ++r) cand.emplace_back(sq_dist(s.Xord, r, Xte, q), 0, r);
    for (int r = 0; r < q; ++r) cand.emplace_back(sq_dist(Xte, r, Xte, q), 1, r);
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());

    auto& tr = su.train_rows[static_cast<std::size_t>(q)];
    auto& te = su.test_rows[static_cast<std::size_t>(q)];
    for (int j = 0; j < k; ++j) {
      const auto& [dist, is_test, idx] = cand[static_cast<std::size_t>(j)];
      (void)dist;
      if (is_test) {
        te.push_back(idx);
      } else {
        tr.push_back(idx);
      }
    }
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());

    // Gather coordinates and diagonal, training block first.
    const int ktr = static_cast<int>(tr.size());
    for (int j = 0; j < ktr; ++j) {
      G.row(j) = s.Xord.row(tr[static_cast<std::size_t>(j)]);
      gd[j] = dadd_train[tr[static_cast<std::size_t>(j)]];
    }
    for (std::size_t j = 0; j < te.size(); ++j) {
      G.row(ktr + static_cast<int>(j)) = Xte.row(te[j]);
      gd[ktr + static_cast<int>(j)] = dadd_test[su.test_order[static_cast<std::size_t>(te[j])]];
    }

    double sigma2;
    if (k == 0) {
      sigma2 = 1.0 + dadd_test[su.test_order[static_cast<std::size_t>(q)]] + jitter;
    } else {
      for (int j = 0; j < k; ++j) {
        Scc(j, j) = 1.0 + gd[j] + jitter;
        for (int i = j + 1; i < k; ++i) {
          double sdist = 0.0;
          for (Eigen::Index t = 0; t < theta.size(); ++t) {
            const double d = G(i, t) - G(j, t);
            sdist += d * d / theta[t];
          }
          const double v = std::exp(-sdist);
          Scc(i, j) = v;
          Scc(j, i) = v;
        }
        double sdist = 0.0;
        for (Eigen::Index t = 0; t < theta.size(); ++t) {
          const double d = G(j, t) - Xte(q, t);
          sdist += d * d / theta[t];
        }
        Sci[j] = std::exp(-sdist);
      }
      auto blk = Scc.topLeftCorner(k, k);
      Eigen::LLT<Eigen::Ref<Matrix>> llt(blk);
      if (llt.info() != Eigen::Success) {
        throw NumericError("build_stacked_U: conditioning block not positive definite at test column " +
                           std::to_string(q));
      }
      auto wh = w.head(k);
      wh = Sci.head(k);
      llt.matrixL().solveInPlace(wh);
      sigma2 = 1.0 + dadd_test[su.test_order[static_cast<std::size_t>(q)]] + jitter -
               wh.squaredNorm();
      llt.matrixU().solveInPlace(wh);
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw NumericError("build_stacked_U: nonpositive conditional variance at test column " +
                         std::to_string(q));
    }
    const double inv_sd = 1.0 / std::sqrt(sigma2);
    su.dinv[q] = inv_sd;
    const int ntr = static_cast<int>(su.train_rows[static_cast<std::size_t>(q)].size());
    su.train_vals[static_cast<std::size_t>(q)].resize(ntr);
    for (int j = 0; j < ntr; ++j) su.train_vals[static_cast<std::size_t>(q)][j] = -w[j] * inv_sd;
    const int nte = static_cast<int>(su.test_rows[static_cast<std::size_t>(q)].size());
    su.test_vals[static_cast<std::size_t>(q)].resize(nte);
    for (int j = 0; j < nte; ++j) su.test_vals[static_cast<std::size_t>(q)][j] = -w[ntr + j] * inv_sd;
  }
  return su;
}

StackedPrediction predict_from_stacked(const StackedU& su, const Vector& values_ord,
                                       bool want_cov) {
  const int p = su.p;
  StackedPrediction out;
  out.mean.resize(p);
  out.var_diag.resize(p);
  if (p == 0) return out;

  // Forward solve U_X^T mu = -U_{nX}^T y over the test block.
  Vector mu(p);
  for (int q = 0; q < p; ++q) {
    double s = 0.0;
    const auto& tr = su.train_rows[static_cast<std::size_t>(q)];
    const auto& tv = su.train_vals[static_cast<std::size_t>(q)];
    for (std::size_t j = 0; j < tr.size(); ++j) {
      s += tv[static_cast<Eigen::Index>(j)] * values_ord[tr[j]];
    }
    const auto& te = su.test_rows[static_cast<std::size_t>(q)];
    const auto& ev = su.test_vals[static_cast<std::size_t>(q)];
    double t = -s;
    for (std::size_t j = 0; j < te.size(); ++j) {
      t -= ev[static_cast<Eigen::Index>(j)] * mu[te[j]];
    }
    mu[q] = t / su.dinv[q];
  }

  // diag and optionally full (U_X U_X^T)^{-1} from backward solves.
  Matrix Z;
  if (want_cov) Z.resize(p, p);
  Vector z(p);
  Vector diag(p);
  for (int q = 0; q < p; ++q) {
    z.setZero();
    z[q] = 1.0;
    // U_X z = e_q: z vanishes above position q, so start the sweep there.
    for (int c = q; c >= 0; --c) {
      z[c] /= su.dinv[c];
      const double zc = z[c];
      if (zc == 0.0) continue;
      const auto& te = su.test_rows[static_cast<std::size_t>(c)];
      const auto& ev = su.test_vals[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < te.size(); ++j) {
        z[te[j]] -= ev[static_cast<Eigen::Index>(j)] * zc;
      }
    }
    diag[q] = z.squaredNorm();
    if (want_cov) Z.col(q) = z;
  }

  Matrix cov;
  if (want_cov) cov = Z.transpose() * Z;
  for (int q = 0; q < p; ++q) {
    const int orig = su.test_order[static_cast<std::size_t>(q)];
    out.mean[orig] = mu[q];
    out.var_diag[orig] = diag[q];
  }
  if (want_cov) {
    out.cov.resize(p, p);
    for (int q = 0; q < p; ++q) {
      for (int r = 0; r < p; ++r) {
        out.cov(su.test_order[static_cast<std::size_t>(q)],
                su.test_order[static_cast<std::size_t>(r)]) = cov(q, r);
      }
    }
  }
  return out;
}

}  // namespace hetgp
